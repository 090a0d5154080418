use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::dataset::Dataset;
use crate::error::{Error, Result};

/// Number of a class's `n` items that go to the training side.
///
/// `⌈ratio·n⌉`, but never all of them: a class needs at least one test item.
pub fn train_count(n: usize, ratio: f64) -> usize {
    let want = (ratio * n as f64 - 1e-9).ceil() as usize;
    want.clamp(1, n - 1)
}

/// Per-class seeded shuffle, then the first [`train_count`] items of every
/// class go to `train` and the rest to `test`. Both keep all class names.
pub fn stratified_split(ds: &Dataset, ratio: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes()];
    for (i, item) in ds.items().iter().enumerate() {
        by_class[item.label].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (class, mut indices) in by_class.into_iter().enumerate() {
        if indices.len() < 2 {
            return Err(Error::Split {
                class: ds.class_names()[class].clone(),
                count: indices.len(),
            });
        }
        indices.shuffle(&mut rng);
        let k = train_count(indices.len(), ratio);
        train.extend(indices[..k].iter().map(|&i| ds.items()[i].clone()));
        test.extend(indices[k..].iter().map(|&i| ds.items()[i].clone()));
    }
    let names = ds.class_names().to_vec();
    Ok((Dataset::new(train, names.clone())?, Dataset::new(test, names)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chromatic::RgbImage;
    use crate::training::dataset::ImageSource;
    use proptest::prelude::*;

    /// Items tagged with a unique id in their single pixel's red channel.
    fn tagged(counts: &[usize]) -> Dataset {
        let total: usize = counts.iter().sum();
        let mut samples = Vec::new();
        let mut id = 0;
        for (label, &n) in counts.iter().enumerate() {
            for _ in 0..n {
                let v = id as f32 / total as f32;
                samples.push((RgbImage::filled(1, 1, [v, 0.0, 0.0]).unwrap(), label));
                id += 1;
            }
        }
        let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
        Dataset::from_memory(samples, names).unwrap()
    }

    fn ids(ds: &Dataset) -> Vec<u32> {
        ds.items()
            .iter()
            .map(|i| match &i.source {
                ImageSource::Memory(img) => img.pixel(0, 0)[0].to_bits(),
                ImageSource::Path(_) => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn ten_items_split_eight_two() {
        let (tr, te) = stratified_split(&tagged(&[10]), 0.8, 0).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
    }

    #[test]
    fn rounding_and_clamping() {
        assert_eq!(train_count(10, 0.7), 7);
        assert_eq!(train_count(7, 0.8), 6);
        assert_eq!(train_count(2, 0.8), 1);
        assert_eq!(train_count(3, 0.8), 2);
        assert_eq!(train_count(5, 0.1), 1);
    }

    #[test]
    fn singleton_class_names_the_class() {
        let err = stratified_split(&tagged(&[3, 1]), 0.8, 0).unwrap_err();
        assert!(matches!(err, Error::Split { ref class, count: 1 } if class == "c1"));
    }

    #[test]
    fn seeded() {
        let ds = tagged(&[6, 9, 4]);
        let a = stratified_split(&ds, 0.8, 5).unwrap();
        let b = stratified_split(&ds, 0.8, 5).unwrap();
        assert_eq!(ids(&a.0), ids(&b.0));
        assert_eq!(ids(&a.1), ids(&b.1));
        let c = stratified_split(&ds, 0.8, 6).unwrap();
        assert_ne!(ids(&a.0), ids(&c.0));
    }

    proptest! {
        #[test]
        fn exact_partition_within_one_item(
            counts in prop::collection::vec(2usize..40, 1..8),
            ratio in 0.05f64..0.95,
            seed in any::<u64>(),
        ) {
            let ds = tagged(&counts);
            let (tr, te) = stratified_split(&ds, ratio, seed).unwrap();
            let mut all: Vec<u32> = ids(&tr).into_iter().chain(ids(&te)).collect();
            all.sort();
            let mut want = ids(&ds);
            want.sort();
            prop_assert_eq!(all, want);
            for (c, &n) in counts.iter().enumerate() {
                let k = tr.class_counts()[c];
                prop_assert!(k + te.class_counts()[c] == n);
                prop_assert!((k as f64 / n as f64 - ratio).abs() <= 1.0 / n as f64 + 1e-12);
            }
        }
    }
}
