//! Consistency, structure-preservation and joint objectives.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ad::Tape;
use crate::ad::Var;
use crate::error::{shape_err, DmacError, Result};
use crate::graph::AnchorGraph;

/// Floor inside the logarithms of the mutual information.
pub const MI_LOG_FLOOR: f64 = 1e-12;

/// Trade-off weights of the joint objective `L_AL + α·L_CM + β·L_SP`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let w = Self { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, x) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !x.is_finite() || x < 0.0 {
                return Err(DmacError::Config {
                    field: field.into(),
                    reason: format!("must be finite and nonnegative, got {x}"),
                });
            }
        }
        Ok(())
    }
}

/// Mutual information between the cluster assignments of two views.
///
/// The joint is estimated over all anchors, `P = (1/m) F_aᵀ F_b`. With
/// marginals `p_x`, `p_y` the result is `Σ P_xy (ln P_xy − ln p_x − ln p_y)`,
/// every logarithm floored at [`MI_LOG_FLOOR`]. Swapping the views transposes
/// `P`, which leaves the value unchanged.
pub fn mutual_information(tape: &mut Tape, fa: Var, fb: Var) -> Result<Var> {
    let (sa, sb) = (tape.value(fa).shape(), tape.value(fb).shape());
    if sa != sb {
        return shape_err(
            "mutual_information",
            format!("{}x{} vs {}x{}", sa.0, sa.1, sb.0, sb.1),
        );
    }
    let m = sa.0 as f64;
    let ft = tape.transpose(fa);
    let raw = tape.matmul(ft, fb)?;
    let p = tape.scale(raw, 1.0 / m);

    // Σ_xy P_xy ln p_x = Σ_x p_x ln p_x, likewise for p_y
    let px = tape.sum_rows(p);
    let py = tape.sum_cols(p);
    let joint = plogp(tape, p)?;
    let hx = plogp(tape, px)?;
    let hy = plogp(tape, py)?;
    let marg = tape.add(hx, hy)?;
    tape.sub(joint, marg)
}

fn plogp(tape: &mut Tape, x: Var) -> Result<Var> {
    let l = tape.ln_clamped(x, MI_LOG_FLOOR);
    let t = tape.mul(x, l)?;
    Ok(tape.sum(t))
}

/// `Σ_{a<b} −MI(F_a, F_b)`; zero with a warning when there is a single view.
pub fn consistency_loss(tape: &mut Tape, fs: &[Var]) -> Result<Var> {
    if fs.is_empty() {
        return Err(DmacError::Argument(
            "consistency loss needs at least one view".into(),
        ));
    }
    let shape = tape.value(fs[0]).shape();
    for &f in fs {
        if tape.value(f).shape() != shape {
            return shape_err("consistency_loss", "cluster distributions differ in shape");
        }
    }
    if fs.len() == 1 {
        log::warn!("consistency loss with a single view has no view pairs; using 0");
        return Ok(tape.constant(crate::ad::Matrix::zeros(1, 1)));
    }
    let mut acc: Option<Var> = None;
    for a in 0..fs.len() {
        for b in a + 1..fs.len() {
            let mi = mutual_information(tape, fs[a], fs[b])?;
            acc = Some(match acc {
                Some(s) => tape.sub(s, mi)?,
                None => tape.scale(mi, -1.0),
            });
        }
    }
    Ok(acc.expect("at least one pair"))
}

/// `Σ_ij ‖z_i − z_j‖² g_ij` for `G = S D⁻¹ Sᵀ`, evaluated as
/// `2(‖Z‖² − ‖D^{-1/2} Sᵀ Z‖²)` without forming `G`.
pub fn structure_preservation_loss(tape: &mut Tape, z: Var, graph: &AnchorGraph) -> Result<Var> {
    let n = tape.value(z).rows();
    if n != graph.n() {
        return shape_err(
            "structure_preservation",
            format!("embedding has {n} rows, graph has {}", graph.n()),
        );
    }
    let inv_sqrt: Vec<f64> = graph.inv_degrees().into_iter().map(f64::sqrt).collect();
    let pooled = tape.sparse_t_matmul(Arc::clone(graph.sparse()), z)?;
    let pooled = tape.scale_rows(pooled, Arc::new(inv_sqrt))?;
    let total = tape.sum_squares(z);
    let smooth = tape.sum_squares(pooled);
    let diff = tape.sub(total, smooth)?;
    Ok(tape.scale(diff, 2.0))
}

/// Structure preservation summed over the views' graphs.
pub fn structure_preservation_total(
    tape: &mut Tape,
    z: Var,
    graphs: &[AnchorGraph],
) -> Result<Var> {
    let mut acc: Option<Var> = None;
    for g in graphs {
        let l = structure_preservation_loss(tape, z, g)?;
        acc = Some(match acc {
            Some(s) => tape.add(s, l)?,
            None => l,
        });
    }
    acc.ok_or_else(|| DmacError::Argument("structure loss needs at least one graph".into()))
}

/// `L_AL + α·L_CM + β·L_SP`.
pub fn joint_loss(tape: &mut Tape, al: Var, cm: Var, sp: Var, w: LossWeights) -> Result<Var> {
    let cm = tape.scale(cm, w.alpha);
    let sp = tape.scale(sp, w.beta);
    let partial = tape.add(al, cm)?;
    tape.add(partial, sp)
}
