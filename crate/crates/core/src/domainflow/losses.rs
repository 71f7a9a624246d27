use std::fmt;
use std::str::FromStr;

use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nets::{
    composite_parameters, prefixed, prefixed_mut, Autoencoder, DiscForward, Discriminator, Generator, Parameters, TensorRef,
};

/// Discriminator outputs are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]`
/// inside the cross-entropy.
pub const PROB_CLAMP: f64 = 1e-7;

/// Autoencoders and generators: everything updated by the generator step.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingParams {
    pub ae_s: Autoencoder,
    pub ae_t: Autoencoder,
    pub g_st: Generator,
    pub g_ts: Generator,
}

impl Parameters for MappingParams {
    fn tensors(&self) -> Vec<TensorRef<'_>> {
        let mut out = prefixed("enc_s", self.ae_s.encoder.tensors());
        out.extend(prefixed("dec_s", self.ae_s.decoder.tensors()));
        out.extend(prefixed("enc_t", self.ae_t.encoder.tensors()));
        out.extend(prefixed("dec_t", self.ae_t.decoder.tensors()));
        out.extend(prefixed("w_st", self.g_st.tensors()));
        out.extend(prefixed("w_ts", self.g_ts.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])> {
        let mut out = prefixed_mut("enc_s", self.ae_s.encoder.tensors_mut());
        out.extend(prefixed_mut("dec_s", self.ae_s.decoder.tensors_mut()));
        out.extend(prefixed_mut("enc_t", self.ae_t.encoder.tensors_mut()));
        out.extend(prefixed_mut("dec_t", self.ae_t.decoder.tensors_mut()));
        out.extend(prefixed_mut("w_st", self.g_st.tensors_mut()));
        out.extend(prefixed_mut("w_ts", self.g_ts.tensors_mut()));
        out
    }
}

/// The source-side and target-side critics.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticParams {
    pub d_s: Discriminator,
    pub d_t: Discriminator,
}

composite_parameters!(CriticParams {
    d_s => "d_s",
    d_t => "d_t",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    SourceToTarget,
    TargetToSource,
}

/// Latent batch living in the intermediate domain it was generated for.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedBatch {
    pub latent: Array2<f64>,
    pub z: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Generator,
    Discriminator,
}

/// Generator targets for the adversarial term.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GenTargetMode {
    /// Opposite-side critic towards 1, same-side critic towards `z`.
    #[default]
    Literal,
    /// Every generator target is 1.
    Classic,
}

impl FromStr for GenTargetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(GenTargetMode::Literal),
            "classic" => Ok(GenTargetMode::Classic),
            other => Err(Error::Config(format!("unknown gen_target_mode `{other}`"))),
        }
    }
}

impl fmt::Display for GenTargetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GenTargetMode::Literal => "literal",
            GenTargetMode::Classic => "classic",
        })
    }
}

/// Loss terms of one step. `total = adv_total + λ₁·cyc + λ₂·rec`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub adv_total: f64,
    pub adv_g_st: f64,
    pub adv_g_ts: f64,
    pub cyc: f64,
    pub rec: f64,
    pub total: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub lambda_cyc: f64,
    pub lambda_rec: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_cyc: 5.0,
            lambda_rec: 1.0,
        }
    }
}

pub fn total_loss(adv: f64, cyc: f64, rec: f64, lambda1: f64, lambda2: f64) -> f64 {
    adv + lambda1 * cyc + lambda2 * rec
}

/// Binary cross-entropy with a soft target, `−[y·log p + (1−y)·log(1−p)]`.
pub fn bce(p: f64, target: f64) -> f64 {
    let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
}

fn blend(gen: &Generator, z: f64) -> Array2<f64> {
    let k = gen.dim();
    &gen.weight * z + &(Array2::<f64>::eye(k) * (1.0 - z))
}

/// `z·W·h + (1 − z)·h` for every row `h` of `latent`.
pub fn interpolate(gen: &Generator, latent: ArrayView2<'_, f64>, z: f64, direction: Direction) -> Result<InterpolatedBatch> {
    if latent.ncols() != gen.dim() {
        return Err(Error::Shape {
            op: "interpolate",
            expected: (latent.nrows(), gen.dim()),
            got: latent.dim(),
        });
    }
    let mapped = latent.dot(&gen.weight.t());
    let latent = &mapped * z + &(&latent * (1.0 - z));
    Ok(InterpolatedBatch { latent, z, direction })
}

/// Mean over the batch of `‖G_TS(G_ST(h_s)) − h_s‖²`, plus the mirrored
/// target-side term.
pub fn cycle_loss(
    g_st: &Generator,
    g_ts: &Generator,
    h_s: ArrayView2<'_, f64>,
    h_t: ArrayView2<'_, f64>,
    z: f64,
) -> Result<f64> {
    let f_st = interpolate(g_st, h_s, z, Direction::SourceToTarget)?.latent;
    let back_s = interpolate(g_ts, f_st.view(), z, Direction::TargetToSource)?.latent;
    let f_ts = interpolate(g_ts, h_t, z, Direction::TargetToSource)?.latent;
    let back_t = interpolate(g_st, f_ts.view(), z, Direction::SourceToTarget)?.latent;
    Ok(mean_sq_dist(back_s.view(), h_s) + mean_sq_dist(back_t.view(), h_t))
}

/// Mean squared reconstruction error of both autoencoders.
pub fn reconstruction_loss(
    ae_s: &Autoencoder,
    ae_t: &Autoencoder,
    x_s: ArrayView2<'_, f64>,
    x_t: ArrayView2<'_, f64>,
) -> Result<f64> {
    let rs = ae_s.decode(ae_s.encode(x_s)?.view())?;
    let rt = ae_t.decode(ae_t.encode(x_t)?.view())?;
    Ok(mean_sq_dist(rs.view(), x_s) + mean_sq_dist(rt.view(), x_t))
}

fn mean_sq_dist(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    let n = a.nrows().max(1) as f64;
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        acc += (x - y) * (x - y);
    }
    acc / n
}

/// Row blocks fed to a critic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Block {
    RealS,
    RealT,
    FakeSt,
    FakeTs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Critic {
    S,
    T,
}

/// One weighted cross-entropy term: `weight · mean BCE(critic(block), target)`.
#[derive(Debug, Clone, Copy)]
struct Term {
    critic: Critic,
    block: Block,
    target: f64,
    weight: f64,
    /// Which generator's share of the adversarial loss this term belongs to.
    direction: Direction,
    name: &'static str,
}

fn adversarial_terms(z: f64, side: Side, mode: GenTargetMode) -> Vec<Term> {
    use Block::*;
    use Critic::*;
    use Direction::*;
    let t = |critic, block, target, weight, direction, name| Term {
        critic,
        block,
        target,
        weight,
        direction,
        name,
    };
    match side {
        Side::Discriminator => vec![
            // source → M(z): D_T separates T from M(z), D_S separates S from M(z)
            t(T, RealT, 1.0, z, SourceToTarget, "adv D_T(y)"),
            t(T, FakeSt, 0.0, z, SourceToTarget, "adv D_T(G_ST)"),
            t(S, RealS, 1.0, 1.0 - z, SourceToTarget, "adv D_S(x)"),
            t(S, FakeSt, 1.0 - z, 1.0 - z, SourceToTarget, "adv D_S(G_ST)"),
            // target → M(1−z), mirrored
            t(S, RealS, 1.0, z, TargetToSource, "adv D_S(x)"),
            t(S, FakeTs, 0.0, z, TargetToSource, "adv D_S(G_TS)"),
            t(T, RealT, 1.0, 1.0 - z, TargetToSource, "adv D_T(y)"),
            t(T, FakeTs, 1.0 - z, 1.0 - z, TargetToSource, "adv D_T(G_TS)"),
        ],
        Side::Generator => {
            let same_side = match mode {
                GenTargetMode::Literal => z,
                GenTargetMode::Classic => 1.0,
            };
            vec![
                t(T, FakeSt, 1.0, z, SourceToTarget, "adv D_T(G_ST)"),
                t(S, FakeSt, same_side, 1.0 - z, SourceToTarget, "adv D_S(G_ST)"),
                t(S, FakeTs, 1.0, z, TargetToSource, "adv D_S(G_TS)"),
                t(T, FakeTs, same_side, 1.0 - z, TargetToSource, "adv D_T(G_TS)"),
            ]
        }
    }
}

/// Critic forward passes and per-logit gradients of the adversarial loss.
struct AdversarialPass {
    breakdown: LossBreakdown,
    /// Blocks stacked into each critic's input, in order.
    layout_s: Vec<Block>,
    layout_t: Vec<Block>,
    rows: usize,
    cache_s: DiscForward,
    cache_t: DiscForward,
    d_logits_s: Array1<f64>,
    d_logits_t: Array1<f64>,
}

struct Latents<'a> {
    real_s: ArrayView2<'a, f64>,
    real_t: ArrayView2<'a, f64>,
    fake_st: ArrayView2<'a, f64>,
    fake_ts: ArrayView2<'a, f64>,
}

impl<'a> Latents<'a> {
    fn block(&self, b: Block) -> ArrayView2<'a, f64> {
        match b {
            Block::RealS => self.real_s,
            Block::RealT => self.real_t,
            Block::FakeSt => self.fake_st,
            Block::FakeTs => self.fake_ts,
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn adversarial_pass<R: Rng + ?Sized>(
    critics: &CriticParams,
    latents: &Latents<'_>,
    z: f64,
    side: Side,
    mode: GenTargetMode,
    train_mode: bool,
    rng: &mut R,
) -> Result<AdversarialPass> {
    let terms = adversarial_terms(z, side, mode);
    let layout = |c: Critic| {
        let mut blocks: Vec<Block> = Vec::new();
        for t in terms.iter().filter(|t| t.critic == c) {
            if !blocks.contains(&t.block) {
                blocks.push(t.block);
            }
        }
        blocks
    };
    let layout_s = layout(Critic::S);
    let layout_t = layout(Critic::T);
    let rows = latents.real_s.nrows();
    for b in [latents.real_t, latents.fake_st, latents.fake_ts] {
        if b.nrows() != rows {
            return Err(Error::Shape {
                op: "adversarial_loss",
                expected: (rows, b.ncols()),
                got: b.dim(),
            });
        }
    }
    let stack = |blocks: &[Block]| {
        let views: Vec<_> = blocks.iter().map(|&b| latents.block(b)).collect();
        concatenate(Axis(0), &views).expect("latent blocks share width")
    };
    let input_s = stack(&layout_s);
    let input_t = stack(&layout_t);
    for (d, input, op) in [(&critics.d_s, &input_s, "D_S input"), (&critics.d_t, &input_t, "D_T input")] {
        if input.ncols() != d.input_dim() {
            return Err(Error::Shape {
                op,
                expected: (input.nrows(), d.input_dim()),
                got: input.dim(),
            });
        }
    }
    let cache_s = critics.d_s.forward(input_s.view(), train_mode, rng);
    let cache_t = critics.d_t.forward(input_t.view(), train_mode, rng);

    let mut d_logits_s = Array1::zeros(cache_s.probs.len());
    let mut d_logits_t = Array1::zeros(cache_t.probs.len());
    let mut breakdown = LossBreakdown::default();
    let n = rows as f64;
    for term in &terms {
        let (cache, layout, d_logits) = match term.critic {
            Critic::S => (&cache_s, &layout_s, &mut d_logits_s),
            Critic::T => (&cache_t, &layout_t, &mut d_logits_t),
        };
        let offset = layout.iter().position(|&b| b == term.block).expect("block in layout") * rows;
        let mut sum = 0.0;
        for i in offset..offset + rows {
            let p = cache.probs[i];
            sum += bce(p, term.target);
            if p > PROB_CLAMP && p < 1.0 - PROB_CLAMP {
                d_logits[i] += term.weight * (p - term.target) / n;
            }
        }
        let value = term.weight * sum / n;
        if !value.is_finite() {
            return Err(Error::NonFinite { term: term.name });
        }
        match term.direction {
            Direction::SourceToTarget => breakdown.adv_g_st += value,
            Direction::TargetToSource => breakdown.adv_g_ts += value,
        }
    }
    breakdown.adv_total = breakdown.adv_g_st + breakdown.adv_g_ts;
    breakdown.total = breakdown.adv_total;
    Ok(AdversarialPass {
        breakdown,
        layout_s,
        layout_t,
        rows,
        cache_s,
        cache_t,
        d_logits_s,
        d_logits_t,
    })
}

/// Adversarial terms only (`cyc`, `rec` are left at zero).
#[allow(clippy::too_many_arguments)]
pub fn adversarial_loss<R: Rng + ?Sized>(
    g_st: &Generator,
    g_ts: &Generator,
    critics: &CriticParams,
    h_s: ArrayView2<'_, f64>,
    h_t: ArrayView2<'_, f64>,
    z: f64,
    side: Side,
    mode: GenTargetMode,
    train_mode: bool,
    rng: &mut R,
) -> Result<LossBreakdown> {
    let f_st = interpolate(g_st, h_s, z, Direction::SourceToTarget)?.latent;
    let f_ts = interpolate(g_ts, h_t, z, Direction::TargetToSource)?.latent;
    let latents = Latents {
        real_s: h_s,
        real_t: h_t,
        fake_st: f_st.view(),
        fake_ts: f_ts.view(),
    };
    Ok(adversarial_pass(critics, &latents, z, side, mode, train_mode, rng)?.breakdown)
}

/// Discriminator-side adversarial loss and its gradient with respect to the
/// critics. Latents are computed from `mapping` and treated as constants.
#[allow(clippy::too_many_arguments)]
pub fn discriminator_objective<R: Rng + ?Sized>(
    mapping: &MappingParams,
    critics: &CriticParams,
    x_s: ArrayView2<'_, f64>,
    x_t: ArrayView2<'_, f64>,
    z: f64,
    train_mode: bool,
    rng: &mut R,
) -> Result<(LossBreakdown, CriticParams)> {
    let h_s = mapping.ae_s.encode(x_s)?;
    let h_t = mapping.ae_t.encode(x_t)?;
    let f_st = interpolate(&mapping.g_st, h_s.view(), z, Direction::SourceToTarget)?.latent;
    let f_ts = interpolate(&mapping.g_ts, h_t.view(), z, Direction::TargetToSource)?.latent;
    let latents = Latents {
        real_s: h_s.view(),
        real_t: h_t.view(),
        fake_st: f_st.view(),
        fake_ts: f_ts.view(),
    };
    let pass = adversarial_pass(
        critics,
        &latents,
        z,
        Side::Discriminator,
        GenTargetMode::Literal,
        train_mode,
        rng,
    )?;
    let mut grads = critics.zeros_like();
    critics
        .d_s
        .backward(&pass.cache_s, pass.d_logits_s.view(), Some(&mut grads.d_s), false);
    critics
        .d_t
        .backward(&pass.cache_t, pass.d_logits_t.view(), Some(&mut grads.d_t), false);
    Ok((pass.breakdown, grads))
}

/// Full generator-side objective `L_adv + λ₁·L_cyc + λ₂·L_rec` and its
/// gradient with respect to autoencoders and generators. Critics are frozen
/// and run without dropout.
pub fn generator_objective(
    mapping: &MappingParams,
    critics: &CriticParams,
    x_s: ArrayView2<'_, f64>,
    x_t: ArrayView2<'_, f64>,
    z: f64,
    mode: GenTargetMode,
    weights: LossWeights,
) -> Result<(LossBreakdown, MappingParams)> {
    let MappingParams { ae_s, ae_t, g_st, g_ts } = mapping;
    let mut grads = mapping.zeros_like();
    let n = x_s.nrows() as f64;
    if x_t.nrows() != x_s.nrows() {
        return Err(Error::Shape {
            op: "generator_objective",
            expected: x_s.dim(),
            got: x_t.dim(),
        });
    }

    let h_s = ae_s.encode(x_s)?;
    let h_t = ae_t.encode(x_t)?;
    let a_st = blend(g_st, z);
    let a_ts = blend(g_ts, z);
    let f_st = h_s.dot(&a_st.t());
    let f_ts = h_t.dot(&a_ts.t());

    // reconstruction
    let rec_s = ae_s.decoder.forward(h_s.view());
    let rec_t = ae_t.decoder.forward(h_t.view());
    let rec = mean_sq_dist(rec_s.view(), x_s) + mean_sq_dist(rec_t.view(), x_t);
    let scale_rec = 2.0 * weights.lambda_rec / n;
    let d_rec_s = (&rec_s - &x_s) * scale_rec;
    let d_rec_t = (&rec_t - &x_t) * scale_rec;
    let mut d_h_s = ae_s.decoder.backward(h_s.view(), d_rec_s.view(), &mut grads.ae_s.decoder);
    let mut d_h_t = ae_t.decoder.backward(h_t.view(), d_rec_t.view(), &mut grads.ae_t.decoder);

    // adversarial
    let latents = Latents {
        real_s: h_s.view(),
        real_t: h_t.view(),
        fake_st: f_st.view(),
        fake_ts: f_ts.view(),
    };
    // critics run without dropout here, so the generator is never drawn from
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let pass = adversarial_pass(critics, &latents, z, Side::Generator, mode, false, &mut rng)?;
    let mut d_f_st = Array2::<f64>::zeros(f_st.dim());
    let mut d_f_ts = Array2::<f64>::zeros(f_ts.dim());
    for (disc, cache, d_logits, layout) in [
        (&critics.d_s, &pass.cache_s, &pass.d_logits_s, &pass.layout_s),
        (&critics.d_t, &pass.cache_t, &pass.d_logits_t, &pass.layout_t),
    ] {
        let d_in = disc.backward(cache, d_logits.view(), None, true).expect("input gradient requested");
        for (k, block) in layout.iter().enumerate() {
            let rows = d_in.slice(s![k * pass.rows..(k + 1) * pass.rows, ..]);
            match block {
                Block::FakeSt => d_f_st += &rows,
                Block::FakeTs => d_f_ts += &rows,
                Block::RealS | Block::RealT => unreachable!("generator side uses generated rows only"),
            }
        }
    }

    // cycle: R_s = F_st·A_tsᵀ − H_s, R_t = F_ts·A_stᵀ − H_t
    let r_s = f_st.dot(&a_ts.t()) - &h_s;
    let r_t = f_ts.dot(&a_st.t()) - &h_t;
    let cyc = (r_s.iter().map(|v| v * v).sum::<f64>() + r_t.iter().map(|v| v * v).sum::<f64>()) / n;
    let scale_cyc = 2.0 * weights.lambda_cyc / n;
    let d_r_s = r_s * scale_cyc;
    let d_r_t = r_t * scale_cyc;
    let mut d_a_st = d_r_t.t().dot(&f_ts);
    let mut d_a_ts = d_r_s.t().dot(&f_st);
    d_f_st += &d_r_s.dot(&a_ts);
    d_f_ts += &d_r_t.dot(&a_st);
    d_h_s -= &d_r_s;
    d_h_t -= &d_r_t;

    // F = H·Aᵀ
    d_a_st += &d_f_st.t().dot(&h_s);
    d_a_ts += &d_f_ts.t().dot(&h_t);
    d_h_s += &d_f_st.dot(&a_st);
    d_h_t += &d_f_ts.dot(&a_ts);
    grads.g_st.weight = d_a_st * z;
    grads.g_ts.weight = d_a_ts * z;

    ae_s.encoder.accumulate_grads(x_s, d_h_s.view(), &mut grads.ae_s.encoder);
    ae_t.encoder.accumulate_grads(x_t, d_h_t.view(), &mut grads.ae_t.encoder);

    if !cyc.is_finite() {
        return Err(Error::NonFinite { term: "cycle" });
    }
    if !rec.is_finite() {
        return Err(Error::NonFinite { term: "reconstruction" });
    }
    let mut breakdown = pass.breakdown;
    breakdown.cyc = cyc;
    breakdown.rec = rec;
    breakdown.lambda1 = weights.lambda_cyc;
    breakdown.lambda2 = weights.lambda_rec;
    breakdown.total = total_loss(breakdown.adv_total, cyc, rec, weights.lambda_cyc, weights.lambda_rec);
    Ok((breakdown, grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius, gaussian_matrix};
    use ndarray::array;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(17)
    }

    fn critics(k: usize, r: &mut ChaCha8Rng) -> CriticParams {
        CriticParams {
            d_s: Discriminator::new(k, &[6, 6], 0.2, 0.1, r),
            d_t: Discriminator::new(k, &[6, 6], 0.2, 0.1, r),
        }
    }

    #[test]
    fn interpolate_boundaries() {
        let mut r = rng();
        let g = Generator::new(gaussian_matrix(3, 3, &mut r));
        let h = gaussian_matrix(4, 3, &mut r);
        assert_eq!(interpolate(&g, h.view(), 0.0, Direction::SourceToTarget).unwrap().latent, h);
        let full = interpolate(&g, h.view(), 1.0, Direction::SourceToTarget).unwrap().latent;
        assert_eq!(full, h.dot(&g.weight.t()));
    }

    #[test]
    fn interpolate_arithmetic() {
        let g = Generator::new(array![[2.0, 0.0], [0.0, 2.0]]);
        let out = interpolate(&g, array![[1.0, 0.0]].view(), 0.5, Direction::SourceToTarget).unwrap();
        assert_eq!(out.latent, array![[1.5, 0.0]]);
        assert_eq!(out.z, 0.5);
    }

    #[test]
    fn interpolate_shape_mismatch() {
        let g = Generator::identity(3);
        assert!(interpolate(&g, array![[1.0, 0.0]].view(), 0.5, Direction::SourceToTarget).is_err());
    }

    #[test]
    fn total_loss_examples() {
        assert_eq!(total_loss(1.0, 0.0, 0.0, 5.0, 1.0), 1.0);
        assert_eq!(total_loss(0.0, 2.0, 3.0, 5.0, 1.0), 13.0);
        assert_eq!(total_loss(0.7, 2.0, 3.0, 0.0, 0.0), 0.7);
    }

    #[test]
    fn cycle_loss_examples() {
        let mut r = rng();
        let g1 = Generator::new(gaussian_matrix(3, 3, &mut r));
        let g2 = Generator::new(gaussian_matrix(3, 3, &mut r));
        let hs = gaussian_matrix(5, 3, &mut r);
        let ht = gaussian_matrix(5, 3, &mut r);
        assert_eq!(cycle_loss(&g1, &g2, hs.view(), ht.view(), 0.0).unwrap(), 0.0);

        let inv = crate::linalg::from_na(&crate::linalg::to_na(g1.weight.view()).try_inverse().unwrap());
        let g_inv = Generator::new(inv);
        assert!(cycle_loss(&g1, &g_inv, hs.view(), ht.view(), 1.0).unwrap() < 1e-10);

        let two = Generator::new(array![[2.0, 0.0], [0.0, 2.0]]);
        let one = Generator::identity(2);
        let h = array![[1.0, 0.0]];
        let zero = Array2::zeros((1, 2));
        // source term only: ‖2h − h‖² = 1
        let source_only = cycle_loss(&two, &one, h.view(), zero.view(), 1.0).unwrap();
        assert!((source_only - 1.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_examples() {
        let mut r = rng();
        let id = Autoencoder::identity(4);
        let x = gaussian_matrix(6, 4, &mut r);
        assert_eq!(reconstruction_loss(&id, &id, x.view(), x.view()).unwrap(), 0.0);

        let ae = Autoencoder::orthonormal(6, 3, &mut r);
        let coeffs = gaussian_matrix(5, 3, &mut r);
        let in_row_space = coeffs.dot(&ae.encoder.weight);
        assert!(reconstruction_loss(&ae, &ae, in_row_space.view(), in_row_space.view()).unwrap() < 1e-10);

        let y = gaussian_matrix(5, 6, &mut r);
        let a = reconstruction_loss(&ae, &ae, y.view(), y.view()).unwrap();
        let rev = y.slice(s![..;-1, ..]).to_owned();
        let b = reconstruction_loss(&ae, &ae, rev.view(), rev.view()).unwrap();
        assert!((a - b).abs() < 1e-12);
    }

    fn forced_half_critics(k: usize, r: &mut ChaCha8Rng) -> CriticParams {
        let mut c = critics(k, r);
        for (_, t) in c.tensors_mut() {
            t.fill(0.0);
        }
        c
    }

    #[test]
    fn half_probabilities_give_log_two_terms() {
        let mut r = rng();
        let c = forced_half_critics(3, &mut r);
        let g = Generator::identity(3);
        let hs = gaussian_matrix(1, 3, &mut r);
        let ht = gaussian_matrix(1, 3, &mut r);
        let ln2 = std::f64::consts::LN_2;
        for z in [0.0, 0.3, 1.0] {
            let d = adversarial_loss(&g, &g, &c, hs.view(), ht.view(), z, Side::Discriminator, GenTargetMode::Literal, false, &mut r).unwrap();
            // per direction: z·(2 ln2) + (1−z)·(2 ln2)
            assert!((d.adv_g_st - 2.0 * ln2).abs() < 1e-12);
            assert!((d.adv_total - 4.0 * ln2).abs() < 1e-12);
            let g_side = adversarial_loss(&g, &g, &c, hs.view(), ht.view(), z, Side::Generator, GenTargetMode::Literal, false, &mut r).unwrap();
            assert!((g_side.adv_g_ts - ln2).abs() < 1e-12);
            assert!((g_side.adv_total - 2.0 * ln2).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_z_source_critic_sees_real_target_for_fake() {
        let terms = adversarial_terms(0.0, Side::Discriminator, GenTargetMode::Literal);
        let fake = terms
            .iter()
            .find(|t| t.critic == Critic::S && t.block == Block::FakeSt)
            .unwrap();
        let real = terms
            .iter()
            .find(|t| t.critic == Critic::S && t.block == Block::RealS && t.direction == Direction::SourceToTarget)
            .unwrap();
        assert_eq!(fake.target, real.target);
        let dt_term = terms
            .iter()
            .find(|t| t.critic == Critic::T && t.block == Block::FakeSt)
            .unwrap();
        assert_eq!(dt_term.weight, 0.0);
    }

    #[test]
    fn combination_weights_sum_to_one() {
        for z in [0.0, 0.25, 0.5, 0.9, 1.0] {
            for side in [Side::Generator, Side::Discriminator] {
                let terms = adversarial_terms(z, side, GenTargetMode::Literal);
                let fake_weight: f64 = terms
                    .iter()
                    .filter(|t| t.block == Block::FakeSt)
                    .map(|t| t.weight)
                    .sum();
                assert!((fake_weight - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn literal_and_classic_agree_at_one() {
        let mut r = rng();
        let c = critics(3, &mut r);
        let g1 = Generator::new(gaussian_matrix(3, 3, &mut r));
        let g2 = Generator::new(gaussian_matrix(3, 3, &mut r));
        let hs = gaussian_matrix(4, 3, &mut r);
        let ht = gaussian_matrix(4, 3, &mut r);
        let a = adversarial_loss(&g1, &g2, &c, hs.view(), ht.view(), 1.0, Side::Generator, GenTargetMode::Literal, false, &mut r).unwrap();
        let b = adversarial_loss(&g1, &g2, &c, hs.view(), ht.view(), 1.0, Side::Generator, GenTargetMode::Classic, false, &mut r).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bce_clamps() {
        assert!(bce(0.0, 1.0).is_finite());
        assert!((bce(0.5, 0.3) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn generator_objective_matches_components() {
        let mut r = rng();
        let mapping = MappingParams {
            ae_s: Autoencoder::orthonormal(5, 3, &mut r),
            ae_t: Autoencoder::orthonormal(5, 3, &mut r),
            g_st: Generator::new(gaussian_matrix(3, 3, &mut r)),
            g_ts: Generator::new(gaussian_matrix(3, 3, &mut r)),
        };
        let c = critics(3, &mut r);
        let xs = gaussian_matrix(4, 5, &mut r);
        let xt = gaussian_matrix(4, 5, &mut r);
        let w = LossWeights::default();
        let (b, _) = generator_objective(&mapping, &c, xs.view(), xt.view(), 0.4, GenTargetMode::Literal, w).unwrap();
        let hs = mapping.ae_s.encode(xs.view()).unwrap();
        let ht = mapping.ae_t.encode(xt.view()).unwrap();
        let cyc = cycle_loss(&mapping.g_st, &mapping.g_ts, hs.view(), ht.view(), 0.4).unwrap();
        let rec = reconstruction_loss(&mapping.ae_s, &mapping.ae_t, xs.view(), xt.view()).unwrap();
        let adv = adversarial_loss(&mapping.g_st, &mapping.g_ts, &c, hs.view(), ht.view(), 0.4, Side::Generator, GenTargetMode::Literal, false, &mut r).unwrap();
        assert!((b.cyc - cyc).abs() < 1e-12);
        assert!((b.rec - rec).abs() < 1e-12);
        assert!((b.adv_total - adv.adv_total).abs() < 1e-12);
        assert_eq!(b.total, total_loss(b.adv_total, b.cyc, b.rec, 5.0, 1.0));
        assert!(frobenius(hs.view()) > 0.0);
    }
}
