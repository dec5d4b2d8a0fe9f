//! Active-vision experiments.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use explore_core::av::{
    central_grid, generate_stitched, load_idx, make_glyph_corpus, run_av_training, AvConfig, AvStrategy, ImageCorpus,
    Split,
};
use explore_core::diff::save_checkpoint;
use explore_core::numerics::sampling::standard_normal;
use explore_core::{pgm, seed};
use serde::{Deserialize, Serialize};

use crate::runs::{self, Cell};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusConfig {
    /// Built-in digit glyphs.
    Glyph {
        train_per_class: usize,
        test_per_class: usize,
        image_size: usize,
        translated: bool,
        noise_std: f64,
        seed: u64,
    },
    /// IDX files; relative paths are resolved against the config file.
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        /// Use only the first images of each split; 0 keeps all.
        train_limit: usize,
        test_limit: usize,
    },
}

impl CorpusConfig {
    pub fn load(&self, base: &Path) -> Result<(ImageCorpus, ImageCorpus)> {
        match self {
            CorpusConfig::Glyph { train_per_class, test_per_class, image_size, translated, noise_std, seed: s } => {
                let mut rng = seed::stream(*s, "av.corpus.train");
                let train =
                    make_glyph_corpus(*train_per_class, *image_size, *translated, *noise_std, Split::Train, &mut rng)?;
                let mut rng = seed::stream(*s, "av.corpus.test");
                let test =
                    make_glyph_corpus(*test_per_class, *image_size, *translated, *noise_std, Split::Test, &mut rng)?;
                Ok((train, test))
            }
            CorpusConfig::Idx { train_images, train_labels, test_images, test_labels, train_limit, test_limit } => {
                let at = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
                let limit = |c: ImageCorpus, n: usize| if n == 0 { c } else { c.take(n) };
                let read = |images: &PathBuf, labels: &PathBuf, split| {
                    let (i, l) = (at(images), at(labels));
                    load_idx(&i, &l, split).with_context(|| format!("loading {} and {}", i.display(), l.display()))
                };
                let train = read(train_images, train_labels, Split::Train)?;
                let test = read(test_images, test_labels, Split::Test)?;
                Ok((limit(train, *train_limit), limit(test, *test_limit)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AvExperiment {
    pub corpus: CorpusConfig,
    pub strategies: Vec<AvStrategy>,
    pub seeds: Vec<u64>,
    pub agent: AvConfig,
    /// Side of the square grid of query locations in stitched composites.
    pub composite_grid: usize,
    /// Stitched composites written per run, each from an s drawn from N(0, I).
    pub composites: usize,
    pub save_checkpoints: bool,
}

impl AvExperiment {
    pub fn validate(&self) -> Result<()> {
        runs::ensure_unique("strategies", &self.strategies)?;
        runs::ensure_unique("seeds", &self.seeds)?;
        self.agent.validate()?;
        if self.composites > 0 && self.composite_grid == 0 {
            bail!("composite_grid must be ≥ 1 when composites are requested");
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for s in &self.strategies {
            for &seed in &self.seeds {
                cells.push(Cell { strategy: s.name().to_owned(), seed });
            }
        }
        cells
    }
}

/// Trains every cell and writes run CSVs, stitched composites, optional
/// checkpoints, the aggregate, the config echo and the manifest.
pub fn run(exp: &AvExperiment, base: &Path, out: &Path, jobs: usize) -> Result<()> {
    exp.validate()?;
    let (train, test) = exp.corpus.load(base)?;
    runs::prepare_out(out, &["composites", "checkpoints"])?;
    runs::write_json(&out.join(runs::CONFIG_FILE), &resolved(exp, base))?;
    runs::run_cells(out, "av", &exp.cells(), jobs, |cell| {
        let strategy: AvStrategy = cell.strategy.parse()?;
        let result = run_av_training(&exp.agent, strategy, cell.seed, &train, &test)?;
        let mut buf = Vec::new();
        result.log.write_csv(&mut buf)?;
        fs::write(out.join(runs::RUNS_DIR).join(format!("{}.csv", cell.stem())), buf)?;

        let (h, w) = (train.height(), train.width());
        let patch = exp.agent.foveation.patch;
        let grid = central_grid(exp.composite_grid, h.min(w), patch);
        let mut rng = seed::stream(cell.seed, "av.composite");
        for k in 0..exp.composites {
            let s: Vec<f64> = (0..exp.agent.s_dim).map(|_| standard_normal(&mut rng)).collect();
            let img = generate_stitched(&result.model.vae, &s, &grid, h, w, patch, &mut rng)?;
            let path = out.join("composites").join(format!("{}-{k}.pgm", cell.stem()));
            pgm::write_file(&path, &pgm::encode_unit(w, h, &img))?;
        }
        if exp.save_checkpoints {
            let dir = out.join("checkpoints");
            save_checkpoint(&dir.join(format!("{}-vae.json", cell.stem())), &result.model.vae)?;
            save_checkpoint(&dir.join(format!("{}-action.json", cell.stem())), &result.model.action)?;
            save_checkpoint(&dir.join(format!("{}-decision.json", cell.stem())), &result.model.decision)?;
        }
        Ok(())
    })?;
    runs::write_aggregate(out)
}

/// The experiment with IDX paths made absolute, so the echo runs from
/// anywhere.
fn resolved(exp: &AvExperiment, base: &Path) -> AvExperiment {
    let mut exp = exp.clone();
    if let CorpusConfig::Idx { train_images, train_labels, test_images, test_labels, .. } = &mut exp.corpus {
        for p in [train_images, train_labels, test_images, test_labels] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
    }
    exp
}

/// Reads an experiment; returns it with the directory relative paths in it
/// refer to.
pub fn load(path: &Path) -> Result<(AvExperiment, PathBuf)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let exp: AvExperiment = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    exp.validate()?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok((exp, base))
}
