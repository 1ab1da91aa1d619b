//! Synthetic inputs with known answers: pop-out stimuli, flat noise,
//! feature stacks with a planted hot spot, and a small fixation dataset.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{fixation_density, FixationSet};
use crate::formats::{fixations::FixationFile, save_image, write_fixations, write_map, write_sfm1};
use crate::raster::{GaussianKernelSpec, Image, SaliencyMap};
use crate::sas::{FeatureLayer, FeatureStack, Layer};

/// Inclusive pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn contains(&self, (x, y): (usize, usize)) -> bool {
        (self.x0..=self.x1).contains(&x) && (self.y0..=self.y1).contains(&y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopoutKind {
    /// A red disk among green ones.
    Color,
    /// A bright disk among dark ones.
    Intensity,
    /// A large disk among small ones.
    Size,
}

impl PopoutKind {
    pub const ALL: [PopoutKind; 3] = [PopoutKind::Color, PopoutKind::Intensity, PopoutKind::Size];

    pub fn name(self) -> &'static str {
        match self {
            PopoutKind::Color => "color",
            PopoutKind::Intensity => "intensity",
            PopoutKind::Size => "size",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Popout {
    pub kind: PopoutKind,
    pub image: Image,
    pub target: BoundingBox,
    pub target_center: (usize, usize),
}

pub const POPOUT_SIZE: usize = 96;
const POPOUT_GRID: usize = 4;
const BACKGROUND: [f64; 3] = [0.5, 0.5, 0.5];

/// A 4×4 array of disks on a gray field with one odd disk out. The seed
/// jitters every disk center by up to ±3 px and picks the target cell.
pub fn popout_stimulus(kind: PopoutKind, seed: u64) -> Popout {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cell = POPOUT_SIZE / POPOUT_GRID;
    let target_cell = rng.random_range(0..POPOUT_GRID * POPOUT_GRID);
    let (distractor, target) = match kind {
        PopoutKind::Color => (([0.2, 0.6, 0.2], 5), ([0.85, 0.15, 0.15], 5)),
        PopoutKind::Intensity => (([0.25, 0.25, 0.25], 5), ([0.95, 0.95, 0.95], 5)),
        PopoutKind::Size => (([0.2, 0.3, 0.7], 3), ([0.2, 0.3, 0.7], 9)),
    };
    let mut disks = Vec::with_capacity(POPOUT_GRID * POPOUT_GRID);
    for i in 0..POPOUT_GRID * POPOUT_GRID {
        let jx: i64 = rng.random_range(-3..=3);
        let jy: i64 = rng.random_range(-3..=3);
        let cx = ((i % POPOUT_GRID) * cell + cell / 2) as i64 + jx;
        let cy = ((i / POPOUT_GRID) * cell + cell / 2) as i64 + jy;
        let (color, r) = if i == target_cell { target } else { distractor };
        disks.push((cx, cy, r as i64, color));
    }
    let image = Image::from_fn(POPOUT_SIZE, POPOUT_SIZE, |x, y| {
        disks
            .iter()
            .find(|(cx, cy, r, _)| {
                let (dx, dy) = (x as i64 - cx, y as i64 - cy);
                dx * dx + dy * dy <= r * r
            })
            .map_or(BACKGROUND, |d| d.3)
    })
    .expect("fixture colors lie in [0, 1]");
    let (cx, cy, r, _) = disks[target_cell];
    let last = POPOUT_SIZE as i64 - 1;
    Popout {
        kind,
        image,
        target: BoundingBox {
            x0: (cx - r).clamp(0, last) as usize,
            y0: (cy - r).clamp(0, last) as usize,
            x1: (cx + r).clamp(0, last) as usize,
            y1: (cy + r).clamp(0, last) as usize,
        },
        target_center: (cx as usize, cy as usize),
    }
}

/// Independent uniform RGB noise.
pub fn noise_image(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height * 3).map(|_| rng.random::<f64>()).collect();
    Image::new(width, height, data).expect("noise lies in [0, 1)")
}

/// Five layers of `maps_per_layer` maps at halving resolutions, each a
/// Gaussian bump at `hot_spot` (image coordinates) over weak uniform noise.
pub fn synthetic_feature_stack(
    width: usize,
    height: usize,
    hot_spot: (usize, usize),
    maps_per_layer: usize,
    seed: u64,
) -> FeatureStack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = Layer::ALL
        .iter()
        .enumerate()
        .map(|(l, &layer)| {
            let div = 1usize << (l + 1);
            let (w, h) = ((width / div).max(2), (height / div).max(2));
            let hx = hot_spot.0 as f32 * (w - 1) as f32 / (width - 1).max(1) as f32;
            let hy = hot_spot.1 as f32 * (h - 1) as f32 / (height - 1).max(1) as f32;
            let spread = (w.min(h) as f32 / 8.0).max(0.75);
            let mut data = Vec::with_capacity(maps_per_layer * w * h);
            for _ in 0..maps_per_layer {
                for y in 0..h {
                    for x in 0..w {
                        let d2 = (x as f32 - hx).powi(2) + (y as f32 - hy).powi(2);
                        data.push(4.0 * (-d2 / (2.0 * spread * spread)).exp() + 0.5 * rng.random::<f32>());
                    }
                }
            }
            FeatureLayer::new(layer, maps_per_layer, h, w, data).expect("sizes agree")
        })
        .collect();
    FeatureStack::new(width, height, layers).expect("distinct layers")
}

/// Ten small images whose fixations form disjoint clusters.
pub fn eval_fixture(seed: u64) -> Vec<FixationSet> {
    const W: usize = 64;
    const H: usize = 48;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..10)
        .map(|i| {
            let cx = (i % 5) as f64 * 12.8 + 6.4;
            let cy = (i / 5) as f64 * 24.0 + 12.0;
            let points = (0..15)
                .map(|_| {
                    let x = (cx + rng.random_range(-2.0..=2.0)).round() as usize;
                    let y = (cy + rng.random_range(-2.0..=2.0)).round() as usize;
                    (x.min(W - 1), y.min(H - 1))
                })
                .collect();
            FixationSet::new(format!("img{i:02}"), W, H, points).expect("points lie inside")
        })
        .collect()
}

/// Density maps used as "perfect" predictions for [`eval_fixture`].
pub fn eval_fixture_maps(sets: &[FixationSet]) -> Result<Vec<SaliencyMap>> {
    let sigma = GaussianKernelSpec::pixels(2.0)?;
    sets.iter().map(|s| fixation_density(s, sigma)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PopoutRecord {
    pub kind: PopoutKind,
    pub image: String,
    pub features: String,
    pub target: BoundingBox,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FixtureManifest {
    pub seed: u64,
    pub popout: Vec<PopoutRecord>,
    pub noise: String,
    pub eval_dataset: String,
    pub eval_maps: String,
}

/// Writes every fixture under `out`:
///
/// ```text
/// popout/{color,intensity,size}.png   stimuli
/// features/{color,intensity,size}.sfm feature stacks, hot spot on target
/// noise.png                           flat-noise control
/// eval/dataset/imgNN.json             fixations
/// eval/maps/imgNN.f32                 density predictions
/// manifest.json
/// ```
pub fn write_all(out: &Path, seed: u64) -> Result<FixtureManifest> {
    let mkdir = |p: &Path| std::fs::create_dir_all(p).map_err(|e| Error::io(p, e));
    for sub in ["popout", "features", "eval/dataset", "eval/maps"] {
        mkdir(&out.join(sub))?;
    }
    let mut popout = Vec::new();
    for kind in PopoutKind::ALL {
        let p = popout_stimulus(kind, seed);
        let image = format!("popout/{}.png", kind.name());
        let features = format!("features/{}.sfm", kind.name());
        save_image(out.join(&image), &p.image)?;
        let stack = synthetic_feature_stack(POPOUT_SIZE, POPOUT_SIZE, p.target_center, 4, seed);
        write_sfm1(out.join(&features), &stack)?;
        popout.push(PopoutRecord {
            kind,
            image,
            features,
            target: p.target,
        });
    }
    save_image(out.join("noise.png"), &noise_image(POPOUT_SIZE, POPOUT_SIZE, seed))?;
    let sets = eval_fixture(seed);
    for (set, map) in sets.iter().zip(eval_fixture_maps(&sets)?) {
        write_fixations(out.join(format!("eval/dataset/{}.json", set.image)), &FixationFile::from_set(set))?;
        write_map(out.join(format!("eval/maps/{}.f32", set.image)), &map)?;
    }
    let manifest = FixtureManifest {
        seed,
        popout,
        noise: "noise.png".into(),
        eval_dataset: "eval/dataset".into(),
        eval_maps: "eval/maps".into(),
    };
    let path = out.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}
