//! The VEEGAN reconstructor objective on finite alphabets.
//!
//! Noise `z ~ p0`, generator `q(x|z)`, data `x ~ p_x` and reconstructor
//! `p(ẑ|x)` over the `z` alphabet are finite tables. The entropic objective
//! `O_entropy = H(z, F(x)) + E||z - F(G(z))||²` is bounded above by
//! `O = KL[q(x|z)p0(z) || p(ẑ|x)p_x(x)] + H(p0) + E||z - F(G(z))||²`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::blackwell::{random_markov, random_simplex, MarkovMatrix};
use crate::dist::{cross_entropy_probs, entropy_probs, DiscreteDist};
use crate::error::{Error, Result};
use crate::par::{stream_rng, Execution};

/// Slack allowed in `O_entropy <= O`.
pub const BOUND_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZAtom {
    pub label: String,
    /// Point used by the reconstruction loss. Defaults to a one-hot vector.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct ConfigRepr {
    z_atoms: Vec<ZAtom>,
    p0: Vec<f64>,
    x_atoms: Vec<String>,
    p_x: Vec<f64>,
    gen_cond: MarkovMatrix,
    rec_cond: MarkovMatrix,
}

/// Finite instantiation of `p0(z)`, `p_x(x)`, `q(x|z)` and `p(ẑ|x)`.
///
/// JSON form: `{"z_atoms": [{"label", "embedding"?}], "p0": [..],
/// "x_atoms": [..], "p_x": [..], "gen_cond": [[..]], "rec_cond": [[..]]}`,
/// with probability vectors aligned to the atom lists.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigRepr", into = "ConfigRepr")]
pub struct FiniteVeeganConfig {
    z_atoms: Vec<ZAtom>,
    embeddings: Vec<Vec<f64>>,
    p0: DiscreteDist,
    p_x: DiscreteDist,
    gen_cond: MarkovMatrix,
    rec_cond: MarkovMatrix,
}

impl TryFrom<ConfigRepr> for FiniteVeeganConfig {
    type Error = Error;

    fn try_from(r: ConfigRepr) -> Result<Self> {
        let z_labels = r.z_atoms.iter().map(|a| a.label.clone()).collect();
        let p0 = DiscreteDist::new(z_labels, r.p0)?;
        let p_x = DiscreteDist::new(r.x_atoms, r.p_x)?;
        FiniteVeeganConfig::new(r.z_atoms, p0, p_x, r.gen_cond, r.rec_cond)
    }
}

impl From<FiniteVeeganConfig> for ConfigRepr {
    fn from(c: FiniteVeeganConfig) -> Self {
        ConfigRepr {
            z_atoms: c.z_atoms,
            p0: c.p0.probs().to_vec(),
            x_atoms: c.p_x.labels().to_vec(),
            p_x: c.p_x.probs().to_vec(),
            gen_cond: c.gen_cond,
            rec_cond: c.rec_cond,
        }
    }
}

impl FiniteVeeganConfig {
    pub fn new(
        z_atoms: Vec<ZAtom>,
        p0: DiscreteDist,
        p_x: DiscreteDist,
        gen_cond: MarkovMatrix,
        rec_cond: MarkovMatrix,
    ) -> Result<Self> {
        let (nz, nx) = (p0.len(), p_x.len());
        if z_atoms.len() != nz || z_atoms.iter().zip(p0.labels()).any(|(a, l)| &a.label != l) {
            return Err(Error::InvalidConfig("z_atoms do not match p0".into()));
        }
        if gen_cond.nrows() != nz || gen_cond.ncols() != nx {
            return Err(Error::Dimension(format!(
                "gen_cond is {}x{}, expected {nz}x{nx}",
                gen_cond.nrows(),
                gen_cond.ncols()
            )));
        }
        if rec_cond.nrows() != nx || rec_cond.ncols() != nz {
            return Err(Error::Dimension(format!(
                "rec_cond is {}x{}, expected {nx}x{nz}",
                rec_cond.nrows(),
                rec_cond.ncols()
            )));
        }
        let embeddings: Vec<Vec<f64>> =
            match z_atoms.iter().filter(|a| a.embedding.is_some()).count() {
                0 => (0..nz)
                    .map(|k| (0..nz).map(|i| if i == k { 1.0 } else { 0.0 }).collect())
                    .collect(),
                n if n == nz => z_atoms
                    .iter()
                    .map(|a| a.embedding.clone().unwrap())
                    .collect(),
                _ => {
                    return Err(Error::InvalidConfig(
                        "either every z atom has an embedding or none does".into(),
                    ))
                }
            };
        let dim = embeddings[0].len();
        if embeddings
            .iter()
            .any(|e| e.len() != dim || e.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::InvalidConfig(
                "embeddings must share one finite dimension".into(),
            ));
        }
        Ok(Self {
            z_atoms,
            embeddings,
            p0,
            p_x,
            gen_cond,
            rec_cond,
        })
    }

    pub fn p0(&self) -> &DiscreteDist {
        &self.p0
    }

    pub fn p_x(&self) -> &DiscreteDist {
        &self.p_x
    }

    pub fn gen_cond(&self) -> &MarkovMatrix {
        &self.gen_cond
    }

    pub fn rec_cond(&self) -> &MarkovMatrix {
        &self.rec_cond
    }

    pub fn embeddings(&self) -> &[Vec<f64>] {
        &self.embeddings
    }

    fn nz(&self) -> usize {
        self.p0.len()
    }

    fn nx(&self) -> usize {
        self.p_x.len()
    }

    fn sq_dist(&self, a: usize, b: usize) -> f64 {
        self.embeddings[a]
            .iter()
            .zip(&self.embeddings[b])
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }
}

/// `p(ẑ) = sum_x p(ẑ|x) p_x(x)`.
pub fn reconstructor_marginal(cfg: &FiniteVeeganConfig) -> DiscreteDist {
    let r = cfg.rec_cond.matrix();
    let px = cfg.p_x.probs();
    let probs = (0..cfg.nz())
        .map(|k| (0..cfg.nx()).map(|x| r[(x, k)] * px[x]).sum())
        .collect();
    DiscreteDist::from_parts_unchecked(cfg.p0.labels().to_vec(), probs)
}

/// `sum_z q(x|z) p0(z)`.
pub fn generator_marginal(cfg: &FiniteVeeganConfig) -> DiscreteDist {
    let g = cfg.gen_cond.matrix();
    let p0 = cfg.p0.probs();
    let probs = (0..cfg.nx())
        .map(|x| (0..cfg.nz()).map(|z| g[(z, x)] * p0[z]).sum())
        .collect();
    DiscreteDist::from_parts_unchecked(cfg.p_x.labels().to_vec(), probs)
}

/// `H(z, F(x)) = -sum_z p0(z) log p(ẑ = z)`; infinite when the
/// reconstructor never reaches an atom that `p0` charges.
pub fn cross_entropy_term(cfg: &FiniteVeeganConfig) -> f64 {
    cross_entropy_probs(cfg.p0.probs(), reconstructor_marginal(cfg).probs())
}

/// `KL[q(x|z)p0(z) || p(ẑ|x)p_x(x)]` with `ẑ` read on the `z` alphabet.
pub fn kl_joint(cfg: &FiniteVeeganConfig) -> f64 {
    let (g, r) = (cfg.gen_cond.matrix(), cfg.rec_cond.matrix());
    let (p0, px) = (cfg.p0.probs(), cfg.p_x.probs());
    let mut acc = 0.0;
    for z in 0..cfg.nz() {
        for x in 0..cfg.nx() {
            let num = p0[z] * g[(z, x)];
            if num == 0.0 {
                continue;
            }
            let den = r[(x, z)] * px[x];
            if den == 0.0 {
                return f64::INFINITY;
            }
            acc += num * (num / den).ln();
        }
    }
    acc
}

/// `E ||z - F(G(z))||²` over the chain `z -> x -> ẑ`.
pub fn autoencoder_loss(cfg: &FiniteVeeganConfig) -> f64 {
    let (g, r) = (cfg.gen_cond.matrix(), cfg.rec_cond.matrix());
    let p0 = cfg.p0.probs();
    let mut acc = 0.0;
    for z in 0..cfg.nz() {
        let mut inner = 0.0;
        for x in 0..cfg.nx() {
            let step: f64 = (0..cfg.nz())
                .map(|zh| r[(x, zh)] * cfg.sq_dist(z, zh))
                .sum();
            inner += g[(z, x)] * step;
        }
        acc += p0[z] * inner;
    }
    acc
}

/// `O = KL + H(p0) + E||z - F(G(z))||²`.
pub fn objective_upper_bound(cfg: &FiniteVeeganConfig) -> f64 {
    kl_joint(cfg) + entropy_probs(cfg.p0.probs()) + autoencoder_loss(cfg)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    /// `O_entropy`.
    pub lhs: f64,
    /// `O`.
    pub rhs: f64,
    pub gap: f64,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

pub fn verify_bound(cfg: &FiniteVeeganConfig) -> BoundReport {
    let ae = autoencoder_loss(cfg);
    let ce = cross_entropy_term(cfg);
    let lhs = ce + ae;
    let rhs = objective_upper_bound(cfg);
    let diagnostic = if ce.is_infinite() {
        Some("reconstructor marginal is zero on an atom charged by p0".to_string())
    } else if rhs.is_infinite() {
        Some("generator joint not absolutely continuous w.r.t. reconstructor joint".to_string())
    } else {
        None
    };
    BoundReport {
        lhs,
        rhs,
        gap: rhs - lhs,
        holds: lhs <= rhs + BOUND_TOLERANCE,
        diagnostic,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimumReport {
    /// Joints agree entrywise and reconstruction is exact, within `tol`.
    pub matched: bool,
    pub joint_gap: f64,
    pub autoencoder_loss: f64,
    pub objective: f64,
    pub entropy: f64,
    /// `max |p(ẑ) - p0|`.
    pub reconstructor_gap: f64,
    /// `max |sum_z q(x|z)p0(z) - p_x|`.
    pub generator_gap: f64,
    /// Objective equals `H(p0)` and both marginals match, within `tol`.
    pub consequences_hold: bool,
}

pub fn matched_optimum_check(cfg: &FiniteVeeganConfig, tol: f64) -> OptimumReport {
    let (g, r) = (cfg.gen_cond.matrix(), cfg.rec_cond.matrix());
    let (p0, px) = (cfg.p0.probs(), cfg.p_x.probs());
    let mut joint_gap: f64 = 0.0;
    for z in 0..cfg.nz() {
        for x in 0..cfg.nx() {
            joint_gap = joint_gap.max((p0[z] * g[(z, x)] - r[(x, z)] * px[x]).abs());
        }
    }
    let ae = autoencoder_loss(cfg);
    let objective = objective_upper_bound(cfg);
    let entropy = entropy_probs(p0);
    let max_gap = |a: &[f64], b: &[f64]| {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let reconstructor_gap = max_gap(reconstructor_marginal(cfg).probs(), p0);
    let generator_gap = max_gap(generator_marginal(cfg).probs(), px);
    let consequences_hold =
        (objective - entropy).abs() <= tol && reconstructor_gap <= tol && generator_gap <= tol;
    OptimumReport {
        matched: joint_gap <= tol && ae <= tol,
        joint_gap,
        autoencoder_loss: ae,
        objective,
        entropy,
        reconstructor_gap,
        generator_gap,
        consequences_hold,
    }
}

/// Two uniform noise atoms mapped bijectively onto two data atoms with the
/// inverse reconstructor.
pub fn bijective_example() -> FiniteVeeganConfig {
    let atoms = vec![
        ZAtom {
            label: "z0".into(),
            embedding: Some(vec![0.0]),
        },
        ZAtom {
            label: "z1".into(),
            embedding: Some(vec![1.0]),
        },
    ];
    let p0 = DiscreteDist::new(vec!["z0".into(), "z1".into()], vec![0.5, 0.5]).unwrap();
    let p_x = DiscreteDist::new(vec!["x0".into(), "x1".into()], vec![0.5, 0.5]).unwrap();
    FiniteVeeganConfig::new(
        atoms,
        p0,
        p_x,
        MarkovMatrix::identity(2),
        MarkovMatrix::identity(2),
    )
    .unwrap()
}

/// Random configuration with alphabets of 2 to 5 atoms, dense tables and
/// Gaussian embeddings of dimension 1 to 3.
pub fn random_config<R: Rng>(rng: &mut R) -> FiniteVeeganConfig {
    let nz = rng.random_range(2..=5);
    let nx = rng.random_range(2..=5);
    let dim = rng.random_range(1..=3);
    let z_atoms = (0..nz)
        .map(|k| ZAtom {
            label: format!("z{k}"),
            embedding: Some((0..dim).map(|_| rng.sample(StandardNormal)).collect()),
        })
        .collect();
    let p0 = DiscreteDist::from_parts_unchecked(
        (0..nz).map(|k| format!("z{k}")).collect(),
        random_simplex(rng, nz),
    );
    let p_x = DiscreteDist::from_parts_unchecked(
        (0..nx).map(|k| format!("x{k}")).collect(),
        random_simplex(rng, nx),
    );
    let gen_cond = random_markov(rng, nz, nx);
    let rec_cond = random_markov(rng, nx, nz);
    FiniteVeeganConfig::new(z_atoms, p0, p_x, gen_cond, rec_cond)
        .expect("random configuration is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CampaignSummary {
    pub configs: usize,
    pub failures: usize,
    /// Largest `lhs - rhs` seen; negative when every bound is strict.
    pub worst_excess: f64,
    pub worst_seed: u64,
}

/// Checks the bound on `configs` random configurations; configuration `i`
/// uses stream `i` of `seed`.
pub fn bound_campaign(configs: usize, seed: u64, exec: Execution) -> CampaignSummary {
    let reports = exec.map(configs, |i| {
        verify_bound(&random_config(&mut stream_rng(seed, i as u64)))
    });
    let mut summary = CampaignSummary {
        configs,
        failures: 0,
        worst_excess: f64::NEG_INFINITY,
        worst_seed: 0,
    };
    for (i, r) in reports.iter().enumerate() {
        if !r.holds {
            summary.failures += 1;
        }
        let excess = r.lhs - r.rhs;
        if excess > summary.worst_excess {
            summary.worst_excess = excess;
            summary.worst_seed = i as u64;
        }
    }
    summary
}
