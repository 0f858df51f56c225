use std::path::Path;

use rand::Rng;

use super::glyph::{render_glyph_styled, GlyphStyle};
use super::idx::load_idx;
use super::{IMAGE_PIXELS, NUM_SYMBOLS};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Synthetic,
    /// Digits from IDX files, operators still synthetic.
    MnistIdx,
}

/// Offset added to glyph seeds of the test split, keeping it disjoint from
/// the training split.
const TEST_SEED_OFFSET: u64 = 1 << 40;

/// Images of every symbol class, split into disjoint train and test pools.
#[derive(Clone, Debug)]
pub struct SymbolSource {
    kind: SourceKind,
    train: Vec<Vec<Vec<f64>>>,
    test: Vec<Vec<Vec<f64>>>,
}

fn synthetic_pool(class: usize, count: usize, seed: u64, offset: u64, style: GlyphStyle) -> Vec<Vec<f64>> {
    (0..count as u64).map(|i| render_glyph_styled(class, offset + seed * 1_000_003 + i, style).into_data()).collect()
}

impl SymbolSource {
    pub fn synthetic(seed: u64, train_per_class: usize, test_per_class: usize) -> Self {
        Self::synthetic_styled(seed, train_per_class, test_per_class, GlyphStyle::default())
    }

    pub fn synthetic_styled(seed: u64, train_per_class: usize, test_per_class: usize, style: GlyphStyle) -> Self {
        let train = (0..NUM_SYMBOLS).map(|c| synthetic_pool(c, train_per_class, seed, 0, style)).collect();
        let test = (0..NUM_SYMBOLS).map(|c| synthetic_pool(c, test_per_class, seed, TEST_SEED_OFFSET, style)).collect();
        SymbolSource { kind: SourceKind::Synthetic, train, test }
    }

    /// Digits from the standard MNIST files in `dir`; operators are rendered.
    pub fn mnist(dir: &Path, seed: u64, operators_train: usize, operators_test: usize) -> Result<Self> {
        let mut source = SymbolSource::synthetic(seed, 0, 0);
        source.kind = SourceKind::MnistIdx;
        for (split, images, labels) in [
            (Split::Train, "train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            (Split::Test, "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        ] {
            let data = load_idx(&dir.join(images), &dir.join(labels))?;
            if data.rows * data.cols != IMAGE_PIXELS {
                return Err(Error::Idx {
                    path: dir.join(images),
                    offset: 8,
                    reason: format!("images are {}x{}, expected 28x28", data.rows, data.cols),
                });
            }
            let pools = match split {
                Split::Train => &mut source.train,
                Split::Test => &mut source.test,
            };
            for (im, &l) in data.images.into_iter().zip(&data.labels) {
                pools[l as usize].push(im);
            }
        }
        for c in 10..NUM_SYMBOLS {
            source.train[c] = synthetic_pool(c, operators_train, seed, 0, GlyphStyle::default());
            source.test[c] = synthetic_pool(c, operators_test, seed, TEST_SEED_OFFSET, GlyphStyle::default());
        }
        Ok(source)
    }

    pub fn kind(&self) -> SourceKind {
        self.kind
    }

    fn pools(&self, split: Split) -> &[Vec<Vec<f64>>] {
        match split {
            Split::Train => &self.train,
            Split::Test => &self.test,
        }
    }

    pub fn count(&self, split: Split, class: usize) -> usize {
        self.pools(split)[class].len()
    }

    pub fn image(&self, split: Split, class: usize, index: usize) -> &[f64] {
        &self.pools(split)[class][index]
    }

    /// A random image index of `class`.
    pub fn sample(&self, split: Split, class: usize, rng: &mut impl Rng) -> Result<usize> {
        let n = self.count(split, class);
        if n == 0 {
            return Err(Error::Config(format!("symbol source has no {split:?} images of class {class}")));
        }
        Ok(rng.gen_range(0..n))
    }
}
