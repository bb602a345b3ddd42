//! Property tests for the mask and array codecs: every encoder must be
//! inverted exactly by its decoder, and geometric helpers must respect
//! their clipping/bounding contracts.

use proptest::prelude::*;
use vitis_core::mask::{decode_rle, encode_rle, Bitmap, InstanceMask, MaskStack};
use vitis_core::npy::{read_npy, read_npz, write_npy, write_npz};

/// Random raster dimensions and a bit per pixel.
fn bitmap_strategy() -> impl Strategy<Value = Bitmap> {
    (1u32..40, 1u32..40)
        .prop_flat_map(|(w, h)| {
            let len = (w * h) as usize;
            (Just(w), Just(h), prop::collection::vec(any::<bool>(), len))
        })
        .prop_map(|(w, h, bits)| {
            let pixels = bits
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| (i as u32 % w, i as u32 / w));
            Bitmap::from_pixels(w, h, pixels)
        })
}

proptest! {
    #[test]
    fn rle_decode_inverts_encode(bitmap in bitmap_strategy()) {
        let encoded = encode_rle(&bitmap);
        let decoded = decode_rle(&encoded).expect("own encoding is canonical");
        prop_assert_eq!(&decoded, &bitmap);
        // Encoding the decode reproduces the exact text: one canonical form.
        prop_assert_eq!(encode_rle(&decoded), encoded);
    }

    #[test]
    fn npy_read_inverts_write(
        shape in (1usize..12, 1usize..12, 1usize..6),
        seed in any::<u64>(),
    ) {
        let (h, w, n) = shape;
        let len = h * w * n;
        let data: Vec<u8> = (0..len).map(|i| (seed.wrapping_mul(i as u64 + 1) >> 60) as u8 & 1).collect();
        let bytes = write_npy(&[h, w, n], &data);
        let array = read_npy(&bytes).expect("own header parses");
        prop_assert_eq!(&array.shape, &vec![h, w, n]);
        prop_assert_eq!(&array.data, &data);

        let zipped = write_npz(&[h, w, n], &data);
        let unzipped = read_npz(&zipped, None).expect("own archive parses");
        prop_assert_eq!(&unzipped.shape, &vec![h, w, n]);
        prop_assert_eq!(unzipped.data, data);
    }

    #[test]
    fn dense_stack_roundtrip_preserves_masks(bitmap in bitmap_strategy()) {
        prop_assume!(bitmap.count_ones() > 0);
        let (w, h) = bitmap.dims();
        // A two-slice stack: the bitmap and its complement-ish shifted copy.
        let mut masks = vec![InstanceMask::<f64>::new(bitmap.clone(), 0.75).unwrap()];
        let shifted = bitmap.translated(1, 0);
        if shifted.count_ones() > 0 {
            masks.push(InstanceMask::new(shifted, 0.5).unwrap());
        }
        let stack = MaskStack::from_masks(w, h, masks.clone()).unwrap();
        let (shape, data) = stack.to_dense();
        let confidences: Vec<f64> = masks.iter().map(|m| m.confidence()).collect();
        let back = MaskStack::from_dense(&shape, &data, Some(&confidences)).unwrap();
        prop_assert_eq!(back.masks().len(), masks.len());
        for (a, b) in back.masks().iter().zip(&masks) {
            prop_assert_eq!(a.bitmap(), b.bitmap());
            prop_assert_eq!(a.confidence(), b.confidence());
        }
    }

    #[test]
    fn translation_clips_and_never_invents_pixels(
        bitmap in bitmap_strategy(),
        dx in -45i64..45,
        dy in -45i64..45,
    ) {
        let moved = bitmap.translated(dx, dy);
        prop_assert!(moved.count_ones() <= bitmap.count_ones());
        // Undoing the shift recovers a subset of the original pixels.
        let back = moved.translated(-dx, -dy);
        prop_assert_eq!(back.intersection_count(&bitmap), back.count_ones());
    }

    #[test]
    fn tight_rect_is_tight_and_covering(bitmap in bitmap_strategy()) {
        match bitmap.tight_rect() {
            None => prop_assert_eq!(bitmap.count_ones(), 0),
            Some(rect) => {
                prop_assert!(bitmap.count_ones() > 0);
                let (mut touch_left, mut touch_right) = (false, false);
                let (mut touch_top, mut touch_bottom) = (false, false);
                for (x, y) in bitmap.iter_set() {
                    prop_assert!(x >= rect.x && x < rect.x + rect.w);
                    prop_assert!(y >= rect.y && y < rect.y + rect.h);
                    touch_left |= x == rect.x;
                    touch_right |= x == rect.x + rect.w - 1;
                    touch_top |= y == rect.y;
                    touch_bottom |= y == rect.y + rect.h - 1;
                }
                prop_assert!(touch_left && touch_right && touch_top && touch_bottom);
            }
        }
    }
}
