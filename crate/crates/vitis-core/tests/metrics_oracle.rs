//! Checks the greedy matcher and the pixel confusion against naive
//! reference implementations written independently of the library code:
//! the oracle spells out the matching rules with plain nested loops.

use vitis_core::mask::{Bitmap, InstanceMask};
use vitis_core::metrics::{
    confusion_semantic, match_instances, ConfusionCounts, Detection,
};
use vitis_core::synth::Lcg64;

/// Reference matcher: walk predictions by descending confidence (earlier
/// input index wins ties), give each the free ground truth with the best
/// IoU at or above the threshold (lowest index wins IoU ties), and count.
fn naive_match(
    preds: &[Detection<InstanceMask<f64>, f64>],
    gts: &[InstanceMask<f64>],
    threshold: f64,
) -> (Vec<(usize, usize)>, ConfusionCounts, Vec<bool>) {
    let mut order: Vec<usize> = (0..preds.len()).collect();
    // Stable selection sort by (confidence desc, index asc), spelled out.
    for i in 0..order.len() {
        let mut best = i;
        for j in i + 1..order.len() {
            let (a, b) = (order[j], order[best]);
            if preds[a].confidence > preds[b].confidence
                || (preds[a].confidence == preds[b].confidence && a < b)
            {
                best = j;
            }
        }
        order.swap(i, best);
    }
    let mut used = vec![false; gts.len()];
    let mut pairs = Vec::new();
    let mut flags = Vec::new();
    for &p in &order {
        let mut chosen: Option<(usize, f64)> = None;
        for (g, gt) in gts.iter().enumerate() {
            if used[g] {
                continue;
            }
            let iou = naive_iou(&preds[p].region, gt);
            if iou < threshold {
                continue;
            }
            let better = match chosen {
                None => true,
                Some((_, best)) => iou > best,
            };
            if better {
                chosen = Some((g, iou));
            }
        }
        match chosen {
            Some((g, _)) => {
                used[g] = true;
                pairs.push((p, g));
                flags.push(true);
            }
            None => flags.push(false),
        }
    }
    let tp = pairs.len() as u64;
    let counts = ConfusionCounts {
        tp,
        fp: preds.len() as u64 - tp,
        fn_: gts.len() as u64 - tp,
    };
    (pairs, counts, flags)
}

fn naive_iou(a: &InstanceMask<f64>, b: &InstanceMask<f64>) -> f64 {
    let (mut inter, mut union) = (0u64, 0u64);
    for y in 0..a.height() {
        for x in 0..a.width() {
            let (pa, pb) = (a.contains(x, y), b.contains(x, y));
            inter += (pa && pb) as u64;
            union += (pa || pb) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

fn random_mask(rng: &mut Lcg64, side: u32, confidence: f64) -> Detection<InstanceMask<f64>, f64> {
    let w = 1 + (rng.next_u64() % (side as u64 / 2)) as u32;
    let h = 1 + (rng.next_u64() % (side as u64 / 2)) as u32;
    let x = (rng.next_u64() % (side - w) as u64) as u32;
    let y = (rng.next_u64() % (side - h) as u64) as u32;
    let pixels = (0..w).flat_map(move |dx| (0..h).map(move |dy| (x + dx, y + dy)));
    let region = InstanceMask::from_pixels(side, side, pixels, confidence).unwrap();
    Detection { region, confidence }
}

#[test]
fn greedy_matcher_equals_the_naive_oracle_on_random_fixtures() {
    let mut rng = Lcg64::new(0xfeed);
    for case in 0..200 {
        let n_pred = (rng.next_u64() % 9) as usize;
        let n_gt = (rng.next_u64() % 9) as usize;
        // Coarse confidences force plenty of ties.
        let preds: Vec<_> = (0..n_pred)
            .map(|_| {
                let conf = (rng.next_u64() % 11) as f64 / 10.0;
                random_mask(&mut rng, 16, conf)
            })
            .collect();
        let gts: Vec<InstanceMask<f64>> =
            (0..n_gt).map(|_| random_mask(&mut rng, 16, 1.0).region).collect();
        for threshold in [0.3, 0.5, 0.75] {
            let outcome = match_instances(&preds, &gts, threshold).unwrap();
            let (pairs, counts, flags) = naive_match(&preds, &gts, threshold);
            assert_eq!(outcome.pairs, pairs, "case {case} thr {threshold}: pair sets differ");
            assert_eq!(outcome.counts, counts, "case {case} thr {threshold}: counts differ");
            let lib_flags: Vec<bool> = outcome.ranking.iter().map(|r| r.matched).collect();
            assert_eq!(lib_flags, flags, "case {case} thr {threshold}: rank flags differ");
        }
    }
}

#[test]
fn pixel_confusion_equals_the_naive_oracle_on_random_fixtures() {
    let mut rng = Lcg64::new(0xc0de);
    for _ in 0..200 {
        let w = 1 + (rng.next_u64() % 24) as u32;
        let h = 1 + (rng.next_u64() % 24) as u32;
        let fill = |rng: &mut Lcg64| {
            let mut b = Bitmap::new(w, h);
            for y in 0..h {
                for x in 0..w {
                    if rng.next_f64() < 0.4 {
                        b.set(x, y, true);
                    }
                }
            }
            b
        };
        let pred = fill(&mut rng);
        let gt = fill(&mut rng);
        let counts = confusion_semantic(&pred, &gt).unwrap();
        let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
        for y in 0..h {
            for x in 0..w {
                match (pred.get(x, y), gt.get(x, y)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => {}
                }
            }
        }
        assert_eq!(counts, ConfusionCounts { tp, fp, fn_ });
    }
}

#[test]
fn confidence_filtered_counts_equal_rematching_the_subset() {
    let mut rng = Lcg64::new(0xabba);
    for _ in 0..100 {
        let n_pred = (rng.next_u64() % 9) as usize;
        let n_gt = (rng.next_u64() % 9) as usize;
        let preds: Vec<_> = (0..n_pred)
            .map(|_| {
                let conf = (rng.next_u64() % 11) as f64 / 10.0;
                random_mask(&mut rng, 16, conf)
            })
            .collect();
        let gts: Vec<InstanceMask<f64>> =
            (0..n_gt).map(|_| random_mask(&mut rng, 16, 1.0).region).collect();
        let outcome = match_instances(&preds, &gts, 0.5).unwrap();
        for threshold in [0.0, 0.3, 0.5, 0.9, 1.0] {
            let fast = outcome.counts_at_confidence(threshold, gts.len());
            let subset: Vec<_> =
                preds.iter().filter(|p| p.confidence >= threshold).cloned().collect();
            let slow = match_instances(&subset, &gts, 0.5).unwrap().counts;
            assert_eq!(fast, slow, "filtered counts must equal re-matching the subset");
        }
    }
}
