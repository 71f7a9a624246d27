//! Self-learning refinement of an initial mapping: alternate CSLS
//! pseudo-dictionary induction with orthogonal Procrustes re-fits, then
//! project both languages into a shared space by symmetric re-weighting.

use log::{info, warn};
use ndarray::{s, Array2, ArrayView2, Axis};

use crate::embedio::{normalize_rows, Dictionary, EmbeddingSpace};
use crate::error::{Error, Result};
use crate::linalg::{frobenius, min_eigenvalue, orthogonal_factor, svd, sym_inv_sqrt, sym_sqrt, LinearMap};
use crate::retrieval::{CslsIndex, Projection, DEFAULT_CSLS_K};

/// Ridge added to a singular dictionary covariance before whitening.
pub const WHITEN_RIDGE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineConfig {
    pub iterations: usize,
    pub dict_top_k: usize,
    pub mutual_nn: bool,
    pub reweight_power: f64,
    pub csls_k: usize,
    /// A pseudo-dictionary smaller than this counts as collapsed.
    pub min_dict_pairs: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        RefineConfig {
            iterations: 5,
            dict_top_k: 15_000,
            mutual_nn: true,
            reweight_power: 0.5,
            csls_k: DEFAULT_CSLS_K,
            min_dict_pairs: 100,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.dict_top_k == 0 || self.csls_k == 0 {
            return Err(Error::Config("iterations, dict_top_k and csls_k must be positive".into()));
        }
        if !self.reweight_power.is_finite() {
            return Err(Error::Config("reweight_power must be finite".into()));
        }
        Ok(())
    }
}

/// Index pairs `(source row, target row)` of a CSLS pseudo-dictionary over
/// the `dict_top_k` most frequent rows of each side. Inputs must be
/// row-normalized and already live in a common space.
pub fn build_pseudo_dictionary(
    mapped_source: ArrayView2<'_, f64>,
    target: ArrayView2<'_, f64>,
    config: &RefineConfig,
) -> Result<Vec<(usize, usize)>> {
    let ns = config.dict_top_k.min(mapped_source.nrows());
    let nt = config.dict_top_k.min(target.nrows());
    let src = mapped_source.slice(s![..ns, ..]);
    let tgt = target.slice(s![..nt, ..]);

    let forward = CslsIndex::build(tgt, config.csls_k);
    let forward = forward.with_queries(src).nearest_all();
    let mut pairs: Vec<(usize, usize)> = forward.iter().enumerate().map(|(i, &(j, _))| (i, j)).collect();
    if config.mutual_nn {
        let backward = CslsIndex::build(src, config.csls_k);
        let backward = backward.with_queries(tgt).nearest_all();
        pairs.retain(|&(i, j)| backward[j].0 == i);
    }
    if pairs.is_empty() {
        return Err(Error::EmptyDictionary);
    }
    Ok(pairs)
}

fn gather(m: ArrayView2<'_, f64>, rows: impl Iterator<Item = usize>) -> Array2<f64> {
    let idx: Vec<usize> = rows.collect();
    m.select(Axis(0), &idx)
}

/// Orthogonal `W` minimizing `‖X_D·W − Y_D‖_F`: `U·Vᵀ` of `SVD(X_Dᵀ·Y_D)`.
pub fn procrustes(x_d: ArrayView2<'_, f64>, y_d: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    if x_d.dim() != y_d.dim() {
        return Err(Error::Shape {
            op: "procrustes",
            expected: x_d.dim(),
            got: y_d.dim(),
        });
    }
    if x_d.nrows() < x_d.ncols() {
        warn!("procrustes on {} pairs in {} dimensions is underdetermined", x_d.nrows(), x_d.ncols());
    }
    Ok(orthogonal_factor(x_d.t().dot(&y_d).view()))
}

/// `‖X_D·W − Y_D‖_F²`.
pub fn procrustes_objective(x_d: ArrayView2<'_, f64>, y_d: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> f64 {
    frobenius((x_d.dot(&w) - y_d).view()).powi(2)
}

fn whitening(x_d: ArrayView2<'_, f64>) -> (Array2<f64>, Array2<f64>) {
    let cov = x_d.t().dot(&x_d);
    let scale = cov.diag().iter().copied().fold(0.0, f64::max).max(1.0);
    let ridge = if min_eigenvalue(cov.view()) <= 1e-10 * scale {
        warn!("dictionary covariance is singular; adding ridge {WHITEN_RIDGE}");
        WHITEN_RIDGE
    } else {
        0.0
    };
    (sym_inv_sqrt(cov.view(), ridge), sym_sqrt(cov.view(), ridge))
}

/// Row-form maps `(T_x, T_y)` such that `X·T_x` and `Y·T_y` share a space:
/// whiten with the dictionary covariance, rotate by the SVD of the whitened
/// cross-covariance, scale by `S^power`, then de-whiten each side through
/// its own rotated whitening inverse.
pub fn reweight_maps(
    x_d: ArrayView2<'_, f64>,
    y_d: ArrayView2<'_, f64>,
    power: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if x_d.dim() != y_d.dim() {
        return Err(Error::Shape {
            op: "symmetric_reweight",
            expected: x_d.dim(),
            got: y_d.dim(),
        });
    }
    let (wx, wx_inv) = whitening(x_d);
    let (wy, wy_inv) = whitening(y_d);
    let (u, sv, v) = svd(x_d.dot(&wx).t().dot(&y_d.dot(&wy)).view());
    let scale = Array2::from_diag(&sv.mapv(|s| s.max(0.0).powf(power)));
    let side = |w: &Array2<f64>, r: &Array2<f64>, w_inv: &Array2<f64>| {
        w.dot(r).dot(&scale).dot(&r.t()).dot(w_inv).dot(r)
    };
    Ok((side(&wx, &u, &wx_inv), side(&wy, &v, &wy_inv)))
}

/// Applies [`reweight_maps`] fitted on the dictionary rows to both full
/// matrices.
pub fn symmetric_reweight(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    dict: &[(usize, usize)],
    power: f64,
) -> Result<(Array2<f64>, Array2<f64>)> {
    if let Some(&(i, j)) = dict.iter().find(|&&(i, j)| i >= x.nrows() || j >= y.nrows()) {
        return Err(Error::Config(format!("dictionary pair ({i}, {j}) is out of range")));
    }
    let x_d = gather(x, dict.iter().map(|p| p.0));
    let y_d = gather(y, dict.iter().map(|p| p.1));
    let (tx, ty) = reweight_maps(x_d.view(), y_d.view(), power)?;
    Ok((x.dot(&tx), y.dot(&ty)))
}

/// One self-learning round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineStep {
    pub dict_size: usize,
    /// Procrustes objective of the re-fitted map on this round's dictionary.
    pub objective: f64,
    /// Objective of the previous map on the same dictionary.
    pub previous_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refined {
    /// Orthogonal source-to-target map from the last Procrustes fit, or the
    /// initial map if the first dictionary collapsed.
    pub mapping: LinearMap,
    /// Shared-space projections from symmetric re-weighting.
    pub projection: Projection,
    /// Final pseudo-dictionary as `(source row, target row)` pairs.
    pub dictionary: Vec<(usize, usize)>,
    pub steps: Vec<RefineStep>,
}

impl Refined {
    pub fn dictionary_words(&self, source: &EmbeddingSpace, target: &EmbeddingSpace) -> Dictionary {
        Dictionary::from_indices(&self.dictionary, source, target)
    }
}

/// Refines `initial` (a source-to-target map on normalized embeddings).
pub fn refine(
    initial: &LinearMap,
    source: &EmbeddingSpace,
    target: &EmbeddingSpace,
    config: &RefineConfig,
) -> Result<Refined> {
    config.validate()?;
    if initial.input_dim() != source.dim() || initial.output_dim() != target.dim() {
        return Err(Error::DimMismatch {
            expected: source.dim(),
            found: initial.input_dim(),
            context: "initial mapping vs embedding dimension",
        });
    }
    let n = config.dict_top_k.min(source.len()).min(target.len());
    let x = source.vectors().slice(s![..n, ..]).to_owned();
    let y = target.vectors().slice(s![..n, ..]).to_owned();
    let mut mapping = initial.clone();
    let mut w: Option<Array2<f64>> = None;
    let mut dictionary: Vec<(usize, usize)> = Vec::new();
    let mut steps = Vec::new();

    for round in 0..config.iterations {
        let mut mapped = mapping.apply(x.view());
        normalize_rows(&mut mapped);
        let pairs = match build_pseudo_dictionary(mapped.view(), y.view(), config) {
            Ok(p) => p,
            Err(Error::EmptyDictionary) if round == 0 => {
                return Err(Error::Config(
                    "pseudo-dictionary is empty; retry with mutual_nn disabled".into(),
                ))
            }
            Err(Error::EmptyDictionary) => Vec::new(),
            Err(e) => return Err(e),
        };
        if pairs.len() < config.min_dict_pairs {
            warn!(
                "round {round}: pseudo-dictionary collapsed to {} pairs; keeping the previous map",
                pairs.len()
            );
            if dictionary.is_empty() {
                dictionary = pairs;
            }
            break;
        }
        let x_d = gather(x.view(), pairs.iter().map(|p| p.0));
        let y_d = gather(y.view(), pairs.iter().map(|p| p.1));
        let fitted = procrustes(x_d.view(), y_d.view())?;
        let previous_objective = match &w {
            Some(prev) => procrustes_objective(x_d.view(), y_d.view(), prev.view()),
            None => f64::NAN,
        };
        let objective = procrustes_objective(x_d.view(), y_d.view(), fitted.view());
        info!("round {round}: {} pairs, objective {objective:.4}", pairs.len());
        steps.push(RefineStep {
            dict_size: pairs.len(),
            objective,
            previous_objective,
        });
        mapping = LinearMap::linear(fitted.t().to_owned());
        w = Some(fitted);
        dictionary = pairs;
    }

    let projection = if w.is_some() {
        let x_d = gather(x.view(), dictionary.iter().map(|p| p.0));
        let y_d = gather(y.view(), dictionary.iter().map(|p| p.1));
        let (tx, ty) = reweight_maps(x_d.view(), y_d.view(), config.reweight_power)?;
        Projection {
            source: LinearMap::linear(tx.reversed_axes()),
            target: LinearMap::linear(ty.reversed_axes()),
        }
    } else {
        Projection::one_sided(mapping.clone())
    };
    Ok(Refined {
        mapping,
        projection,
        dictionary,
        steps,
    })
}

/// Row-normalized copy of the first `n` rows.
pub fn top_rows(m: ArrayView2<'_, f64>, n: usize) -> Array2<f64> {
    let mut out = m.slice(s![..n.min(m.nrows()), ..]).to_owned();
    normalize_rows(&mut out);
    out
}

/// Fraction of `pairs` that appear in `gold`.
pub fn pair_recall(pairs: &[(usize, usize)], gold: &[(usize, usize)]) -> f64 {
    if gold.is_empty() {
        return 0.0;
    }
    let set: std::collections::HashSet<_> = pairs.iter().collect();
    gold.iter().filter(|p| set.contains(p)).count() as f64 / gold.len() as f64
}
