//! Synthetic labeled datasets with planted discriminative joints.
//!
//! Stands in for real capture data in tests and benchmarks. Each class gets a
//! template motion: piecewise-linear paths through random control points for
//! the discriminative joints, a shared rest pose for the others. A sequence
//! samples its class template with a monotone time reparameterization drawn
//! from the speed-jitter range (every control point is hit exactly, so the
//! sampled polygonal image is identical across speeds), then adds Gaussian
//! coordinate noise and a random global translation.
//!
//! A relative motif rides a per-sequence random "carrier" path added to both
//! the joint and its reference: the joint's absolute view is dominated by the
//! carrier while the relative view shows the clean class signal.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Frame, FrameSequence, LabeledDataset, Point3, Skeleton};

/// One discriminative joint assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub joint: String,
    /// Present for a relative motif: the carrier reference joint.
    #[serde(default)]
    pub reference: Option<String>,
    /// Distinct motion variants this motif contributes; class identity is the
    /// mixed-radix combination of all motif variants.
    pub variants: usize,
    /// Carrier path amplitude for relative motifs.
    #[serde(default = "default_carrier")]
    pub carrier_amplitude: f64,
}

fn default_carrier() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub skeleton: Skeleton,
    pub classes: usize,
    pub sequences_per_class: usize,
    pub frames_mean: usize,
    #[serde(default)]
    pub frames_sd: f64,
    #[serde(default)]
    pub noise_sd: f64,
    /// Per-segment speed multiplier range (lo, hi); (1, 1) disables jitter.
    pub speed_jitter: (f64, f64),
    #[serde(default = "default_translation")]
    pub translation_sd: f64,
    /// Amplitude of per-sequence random motion on joints that are neither a
    /// motif joint nor a motif reference. 0 leaves them at the rest pose.
    #[serde(default)]
    pub distractor_amplitude: f64,
    pub motifs: Vec<Motif>,
    pub seed: u64,
}

fn default_translation() -> f64 {
    1.0
}

const CONTROL_POINTS: usize = 5;
/// Distance between variant boxes; large against the unit box so variants
/// never overlap.
const VARIANT_SPACING: f64 = 4.0;

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.classes == 0 || self.sequences_per_class == 0 {
            return Err(Error::InvalidConfig("need classes and sequences".into()));
        }
        if self.motifs.is_empty() {
            return Err(Error::InvalidConfig(
                "need at least one discriminative motif".into(),
            ));
        }
        if self.frames_mean < CONTROL_POINTS + 1 {
            return Err(Error::InvalidConfig(format!(
                "frames_mean must be at least {}",
                CONTROL_POINTS + 1
            )));
        }
        if self.noise_sd < 0.0 || self.frames_sd < 0.0 {
            return Err(Error::InvalidConfig("negative noise or frame spread".into()));
        }
        let (lo, hi) = self.speed_jitter;
        if !(lo > 0.0 && hi >= lo) {
            return Err(Error::InvalidConfig(format!(
                "invalid speed jitter range ({lo}, {hi})"
            )));
        }
        let mut capacity = 1usize;
        for m in &self.motifs {
            if m.variants == 0 {
                return Err(Error::InvalidConfig("motif needs at least one variant".into()));
            }
            if m.reference.as_ref() == Some(&m.joint) {
                return Err(Error::InvalidConfig("motif relative to itself".into()));
            }
            self.skeleton.joint_index(&m.joint)?;
            if let Some(r) = &m.reference {
                self.skeleton.joint_index(r)?;
            }
            capacity = capacity.saturating_mul(m.variants);
        }
        if capacity < self.classes {
            return Err(Error::InvalidConfig(format!(
                "{} classes exceed the {capacity} motif variant combinations",
                self.classes
            )));
        }
        Ok(())
    }

    /// Variant index of each motif for a class (mixed radix).
    fn variant_assignment(&self, class: usize) -> Vec<usize> {
        let mut rem = class;
        self.motifs
            .iter()
            .map(|m| {
                let v = rem % m.variants;
                rem /= m.variants;
                v
            })
            .collect()
    }
}

/// Piecewise-linear path through `points`, evaluated at parameter `t` in
/// [0, 1] with uniform knot spacing.
fn eval_polyline(points: &[Point3], t: f64) -> Point3 {
    let segs = points.len() - 1;
    let x = t.clamp(0.0, 1.0) * segs as f64;
    let s = (x.floor() as usize).min(segs - 1);
    let frac = x - s as f64;
    let (a, b) = (points[s], points[s + 1]);
    [
        a[0] + frac * (b[0] - a[0]),
        a[1] + frac * (b[1] - a[1]),
        a[2] + frac * (b[2] - a[2]),
    ]
}

/// Splits `total` sample intervals over `segments` proportionally to
/// `weights`, at least one each, by largest remainder.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let segments = weights.len();
    debug_assert!(total >= segments);
    let spare = total - segments;
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| spare as f64 * w / sum).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| 1 + q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..segments).collect();
    order.sort_by(|&a, &b| {
        let fa = quotas[a] - quotas[a].floor();
        let fb = quotas[b] - quotas[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for i in 0..(total - assigned) {
        counts[order[i % segments]] += 1;
    }
    counts
}

/// Samples a control-point path with `n` vertices, hitting every control
/// point exactly; segment densities follow the jittered weights.
fn sample_path(points: &[Point3], n: usize, weights: &[f64]) -> Vec<Point3> {
    let counts = apportion(n - 1, weights);
    let mut out = Vec::with_capacity(n);
    for (s, &m) in counts.iter().enumerate() {
        let (a, b) = (points[s], points[s + 1]);
        for t in 0..m {
            let frac = t as f64 / m as f64;
            out.push([
                a[0] + frac * (b[0] - a[0]),
                a[1] + frac * (b[1] - a[1]),
                a[2] + frac * (b[2] - a[2]),
            ]);
        }
    }
    out.push(points[points.len() - 1]);
    out
}

/// Generates the dataset. Deterministic per seed.
pub fn generate(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let joints = spec.skeleton.len();

    // Shared rest pose: joints spread out deterministically.
    let rest: Vec<Point3> = (0..joints)
        .map(|_| {
            [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ]
        })
        .collect();

    // Per motif, per variant: control points in a unit box offset along y by
    // the variant index.
    let mut variant_paths: Vec<Vec<Vec<Point3>>> = Vec::with_capacity(spec.motifs.len());
    for motif in &spec.motifs {
        let joint = spec.skeleton.joint_index(&motif.joint)?;
        let mut per_variant = Vec::with_capacity(motif.variants);
        for v in 0..motif.variants {
            let base = rest[joint];
            let offset = v as f64 * VARIANT_SPACING;
            let points: Vec<Point3> = (0..CONTROL_POINTS)
                .map(|_| {
                    [
                        base[0] + rng.gen_range(-0.5..0.5),
                        base[1] + offset + rng.gen_range(-0.5..0.5),
                        base[2] + rng.gen_range(-0.5..0.5),
                    ]
                })
                .collect();
            per_variant.push(points);
        }
        variant_paths.push(per_variant);
    }

    let frames_dist = Normal::new(spec.frames_mean as f64, spec.frames_sd)
        .map_err(|e| Error::InvalidConfig(format!("frame distribution: {e}")))?;
    let noise_dist = Normal::new(0.0, spec.noise_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(format!("noise distribution: {e}")))?;
    let translation_dist = Normal::new(0.0, spec.translation_sd.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::InvalidConfig(format!("translation distribution: {e}")))?;

    let mut sequences = Vec::with_capacity(spec.classes * spec.sequences_per_class);
    for class in 0..spec.classes {
        let variants = spec.variant_assignment(class);
        for s in 0..spec.sequences_per_class {
            let n = (frames_dist.sample(&mut rng).round() as i64)
                .clamp(CONTROL_POINTS as i64 + 1, 100_000) as usize;

            let (lo, hi) = spec.speed_jitter;
            let weights: Vec<f64> = (0..CONTROL_POINTS - 1)
                .map(|_| if hi > lo { rng.gen_range(lo..hi) } else { lo })
                .collect();

            // Per-sequence carrier control points, one path per motif that
            // declares a reference.
            let carriers: Vec<Option<Vec<Point3>>> = spec
                .motifs
                .iter()
                .map(|m| {
                    m.reference.as_ref().map(|_| {
                        (0..4)
                            .map(|_| {
                                let a = m.carrier_amplitude;
                                [
                                    rng.gen_range(-a..a),
                                    rng.gen_range(-a..a),
                                    rng.gen_range(-a..a),
                                ]
                            })
                            .collect()
                    })
                })
                .collect();

            // Distractor joints wander on their own per-sequence path.
            let distractors: Vec<Option<Vec<Point3>>> = (0..joints)
                .map(|j| {
                    let name = spec.skeleton.joint_name(j);
                    let involved = spec.motifs.iter().any(|m| {
                        m.joint == name || m.reference.as_deref() == Some(name)
                    });
                    if involved || spec.distractor_amplitude <= 0.0 {
                        None
                    } else {
                        let a = spec.distractor_amplitude;
                        Some(
                            (0..4)
                                .map(|_| {
                                    [
                                        rng.gen_range(-a..a),
                                        rng.gen_range(-a..a),
                                        rng.gen_range(-a..a),
                                    ]
                                })
                                .collect(),
                        )
                    }
                })
                .collect();

            let translation: Point3 = if spec.translation_sd > 0.0 {
                [
                    translation_dist.sample(&mut rng),
                    translation_dist.sample(&mut rng),
                    translation_dist.sample(&mut rng),
                ]
            } else {
                [0.0; 3]
            };

            // Base frames: rest pose everywhere, motif paths on top.
            let mut positions: Vec<Vec<Point3>> = vec![rest.clone(); n];
            for (m, motif) in spec.motifs.iter().enumerate() {
                let joint = spec.skeleton.joint_index(&motif.joint)?;
                let path = sample_path(&variant_paths[m][variants[m]], n, &weights);
                for (i, p) in path.into_iter().enumerate() {
                    positions[i][joint] = p;
                }
                if let (Some(reference), Some(carrier)) = (&motif.reference, &carriers[m]) {
                    let reference = spec.skeleton.joint_index(reference)?;
                    for (i, frame) in positions.iter_mut().enumerate() {
                        let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                        let c = eval_polyline(carrier, t);
                        for k in 0..3 {
                            frame[joint][k] += c[k];
                            frame[reference][k] += c[k];
                        }
                    }
                }
            }
            for (j, walk) in distractors.iter().enumerate() {
                if let Some(walk) = walk {
                    for (i, frame) in positions.iter_mut().enumerate() {
                        let t = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                        let w = eval_polyline(walk, t);
                        for k in 0..3 {
                            frame[j][k] += w[k];
                        }
                    }
                }
            }

            // Noise, then the global translation.
            let frames = positions
                .into_iter()
                .map(|mut frame| {
                    for p in &mut frame {
                        for k in 0..3 {
                            if spec.noise_sd > 0.0 {
                                p[k] += noise_dist.sample(&mut rng);
                            }
                            p[k] += translation[k];
                        }
                    }
                    Frame::new(frame)
                })
                .collect::<Result<Vec<_>>>()?;

            sequences.push(FrameSequence::new(
                format!("class{class}"),
                Some(format!("s{s}")),
                30.0,
                frames,
            )?);
        }
    }

    LabeledDataset::new(
        spec.skeleton.clone(),
        sequences,
        Some(Frame::new(rest)?),
    )
}

/// Small fully connected-enough test skeleton: a star of `n` joints around
/// the first one.
pub fn star_skeleton(n: usize) -> Skeleton {
    let joints: Vec<String> = (0..n).map(|i| format!("j{i}")).collect();
    let edges: Vec<(String, String)> = (1..n).map(|i| ("j0".to_string(), format!("j{i}"))).collect();
    Skeleton::new(joints, &edges, vec!["j0".into()]).expect("star skeleton is valid")
}
