//! Analytic noise-budget prediction, calibrated against measured budgets.

use super::eval::lane_coefficients;
use super::quant::{QDense, QPoly, QuantizedModel};
use super::{EncError, Stage};
use crate::she::{Context, RELIN_BASE_BITS};

/// Predicted budget in bits after every stage, for one lane.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetForecast {
    pub plain_modulus: u64,
    pub fresh: f64,
    pub stages: Vec<(Stage, f64)>,
}

impl BudgetForecast {
    /// First stage predicted to leave no budget.
    pub fn exhausted(&self) -> Option<(Stage, f64)> {
        self.stages.iter().copied().find(|&(_, b)| b <= 0.0)
    }

    pub fn final_budget(&self) -> f64 {
        self.stages.last().map_or(self.fresh, |s| s.1)
    }
}

fn log2_t(ctx: &Context) -> f64 {
    (ctx.plain_modulus() as f64).log2()
}

fn log2_n(ctx: &Context) -> f64 {
    (ctx.degree() as f64).log2()
}

pub fn fresh_budget(ctx: &Context) -> f64 {
    ctx.ring().coeff_modulus().bits() as f64 - log2_t(ctx) - (log2_n(ctx) / 2.0 + 5.5)
}

/// Budget of a product of two ciphertexts with budgets `a` and `b`.
pub fn product_budget(ctx: &Context, a: f64, b: f64) -> f64 {
    a.min(b) - log2_t(ctx) - log2_n(ctx)
}

/// Ceiling imposed by relinearization noise.
pub fn relin_ceiling(ctx: &Context) -> f64 {
    let digits = ctx.ring().relin_count() as f64;
    ctx.ring().coeff_modulus().bits() as f64
        - log2_t(ctx)
        - (RELIN_BASE_BITS as f64 + digits.log2() + log2_n(ctx) / 2.0 + 4.0)
}

/// Budget after weights `rows` (residues mod `t`) act on inputs with budget `b`.
fn linear_budget(ctx: &Context, b: f64, rows: impl Iterator<Item = Vec<i64>>) -> f64 {
    let worst = rows
        .map(|r| {
            r.iter()
                .map(|&w| (ctx.plain().center(ctx.plain().reduce_i64(w)) as f64).powi(2))
                .sum::<f64>()
        })
        .fold(0.0, f64::max);
    if worst == 0.0 {
        return f64::INFINITY;
    }
    b - worst.sqrt().log2() - 0.5
}

/// Budget after the activation; powers are built by repeated halving.
pub fn activation_budget(ctx: &Context, poly: &QPoly, input_scale: i32, b: f64) -> f64 {
    let coeffs = lane_coefficients(ctx, poly, input_scale);
    let d = poly.degree();
    let mut powers = vec![b; d + 1];
    let relin = relin_ceiling(ctx);
    for k in 2..=d {
        let hi = 1 << (usize::BITS - 1 - k.leading_zeros());
        let (x, y) = if hi == k { (k / 2, k / 2) } else { (hi, k - hi) };
        let operand = |j: usize| if j == 1 { powers[1] } else { powers[j].min(relin) };
        powers[k] = product_budget(ctx, operand(x), operand(y));
    }
    let terms: Vec<f64> = (1..=d)
        .filter(|&k| coeffs[k] != 0)
        .map(|k| powers[k] - (coeffs[k].unsigned_abs() as f64).log2())
        .collect();
    let spread = (terms.len().max(1) as f64).log2() / 2.0;
    terms.into_iter().fold(f64::INFINITY, f64::min) - spread
}

fn dense_rows(fc: &QDense) -> impl Iterator<Item = Vec<i64>> + '_ {
    (0..fc.outputs).map(|o| fc.row(o).to_vec())
}

/// Walks the network's stages for the lane `ctx`.
pub fn forecast(model: &QuantizedModel, ctx: &Context) -> BudgetForecast {
    let fresh = fresh_budget(ctx);
    let relin = relin_ceiling(ctx);
    let mut stages = Vec::new();
    let mut b = fresh;
    let mut scale = model.input_scale;
    for (conv, st) in [
        (&model.conv1, [Stage::Conv1, Stage::Act1, Stage::Pool1]),
        (&model.conv2, [Stage::Conv2, Stage::Act2, Stage::Pool2]),
    ] {
        let [f, kh, kw, c] = conv.shape;
        let per = kh * kw * c;
        b = linear_budget(ctx, b, (0..f).map(|fi| conv.weights[fi * per..(fi + 1) * per].to_vec()));
        scale += conv.weight_scale;
        stages.push((st[0], b));
        b = activation_budget(ctx, &model.activation, scale, b);
        scale = model.activation.output_scale(scale);
        stages.push((st[1], b));
        b = (b - 1.0).min(relin);
        scale += 2;
        stages.push((st[2], b));
    }
    b = linear_budget(ctx, b, dense_rows(&model.fc1));
    scale += model.fc1.weight_scale;
    stages.push((Stage::Fc1, b));
    b = activation_budget(ctx, &model.activation, scale, b).min(relin);
    stages.push((Stage::Act3, b));
    b = linear_budget(ctx, b, dense_rows(&model.fc2));
    stages.push((Stage::Fc2, b));
    BudgetForecast {
        plain_modulus: ctx.plain_modulus(),
        fresh,
        stages,
    }
}

/// Fails with the first stage predicted to exhaust the budget.
pub fn audit(model: &QuantizedModel, ctx: &Context) -> Result<BudgetForecast, EncError> {
    let f = forecast(model, ctx);
    match f.exhausted() {
        Some((stage, b)) => Err(EncError::PredictedBudget {
            layer: stage.label().to_string(),
            plain_modulus: ctx.plain_modulus(),
            budget: b.floor() as i64,
        }),
        None => Ok(f),
    }
}
