use std::path::PathBuf;
use std::sync::Arc;

use crate::chromatic::RgbImage;
use crate::error::{Error, Result};

/// Where a sample's pixels come from.
#[derive(Debug, Clone)]
pub enum ImageSource {
    /// Decoded from disk each time it is needed.
    Path(PathBuf),
    /// Already in memory (generated corpora, tests).
    Memory(Arc<RgbImage>),
}

#[derive(Debug, Clone)]
pub struct Item {
    pub source: ImageSource,
    pub label: usize,
}

/// Labelled images plus the ordered class names the labels index into.
#[derive(Debug, Clone)]
pub struct Dataset {
    items: Vec<Item>,
    class_names: Vec<String>,
}

impl Dataset {
    /// Checks that every label is in range and every class has an item.
    pub fn new(items: Vec<Item>, class_names: Vec<String>) -> Result<Self> {
        let mut counts = vec![0usize; class_names.len()];
        for item in &items {
            match counts.get_mut(item.label) {
                Some(c) => *c += 1,
                None => {
                    return Err(Error::Dataset(format!(
                        "label {} out of range for {} classes",
                        item.label,
                        class_names.len()
                    )))
                }
            }
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Dataset(format!(
                "class `{}` has no images",
                class_names[empty]
            )));
        }
        Ok(Dataset { items, class_names })
    }

    pub fn from_memory(samples: Vec<(RgbImage, usize)>, class_names: Vec<String>) -> Result<Self> {
        let items = samples
            .into_iter()
            .map(|(img, label)| Item {
                source: ImageSource::Memory(Arc::new(img)),
                label,
            })
            .collect();
        Self::new(items, class_names)
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.items.iter().map(|i| i.label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_names.len()];
        for item in &self.items {
            counts[item.label] += 1;
        }
        counts
    }

    /// Pixels of item `index` at their stored size.
    pub fn original(&self, index: usize) -> Result<RgbImage> {
        match &self.items[index].source {
            ImageSource::Path(p) => crate::model_io::decode_image_native(p),
            ImageSource::Memory(img) => Ok(RgbImage::clone(img)),
        }
    }

    /// Pixels of item `index`, resized to `size × size`.
    pub fn image(&self, index: usize, size: usize) -> Result<RgbImage> {
        match &self.items[index].source {
            ImageSource::Path(p) => crate::model_io::decode_image(p, size),
            ImageSource::Memory(img) if img.height() == size && img.width() == size => {
                Ok(RgbImage::clone(img))
            }
            ImageSource::Memory(img) => crate::model_io::resize(img, size),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(v: f32) -> RgbImage {
        RgbImage::filled(4, 4, [v, v, v]).unwrap()
    }

    #[test]
    fn labels_must_be_in_range_and_cover_classes() {
        let names = vec!["a".to_string(), "b".to_string()];
        assert!(Dataset::from_memory(vec![(img(0.1), 0), (img(0.2), 1)], names.clone()).is_ok());
        assert!(Dataset::from_memory(vec![(img(0.1), 0), (img(0.2), 2)], names.clone()).is_err());
        let err = Dataset::from_memory(vec![(img(0.1), 0)], names).unwrap_err();
        assert!(err.to_string().contains("`b`"));
    }

    #[test]
    fn memory_images_are_resized_on_request() {
        let ds = Dataset::from_memory(vec![(img(0.5), 0)], vec!["a".into()]).unwrap();
        assert_eq!(ds.image(0, 4).unwrap(), img(0.5));
        let big = ds.image(0, 8).unwrap();
        assert_eq!((big.height(), big.width()), (8, 8));
        assert!(big.pixels().iter().all(|&v| (v - 0.5).abs() < 1e-2));
    }
}
