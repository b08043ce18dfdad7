use num_complex::Complex64;

use super::fiber::FiberNode;
use crate::error::{Error, Result};
use crate::linalg::{CMat, MAX};
use crate::metrics::{Jet, MetricField};

type C = Complex64;

/// The potential `φ(z, [w]) = log(w^H G(z) w)` of the induced metric `e^{-φ}` on
/// `O_{P(E)}(1)`, with `G` the matrix of `h*`.
#[derive(Debug, Clone)]
pub struct InducedPhi {
    hstar: MetricField,
}

pub fn induced_phi(hstar: &MetricField) -> Result<InducedPhi> {
    Ok(InducedPhi {
        hstar: hstar.clone(),
    })
}

impl InducedPhi {
    pub fn hstar(&self) -> &MetricField {
        &self.hstar
    }

    pub fn rank(&self) -> usize {
        self.hstar.rank()
    }

    /// `φ` at a base node; `-∞` where `w^H G w = 0`.
    pub fn value(&self, node: usize, w: &[C]) -> Result<f64> {
        if w.iter().all(|x| x.norm() == 0.0) {
            return Err(Error::ZeroFiberVector);
        }
        if w.len() != self.rank() {
            return Err(Error::RankMismatch {
                expected: self.rank(),
                got: w.len(),
            });
        }
        let q = self.hstar.matrix_at(node).quad_form(w).re;
        Ok(if q > 0.0 { q.ln() } else { f64::NEG_INFINITY })
    }

    /// Jet of `G` at a node in the frame where `G(z_0) = Id`.
    pub fn normalized_jet(&self, node: usize) -> Result<Jet> {
        normalize(&self.hstar.jet_at(node)?).ok_or(Error::FlaggedNode { node })
    }
}

/// Rewrites the jet of `G` in the frame `L^{-1}`, `L L^H = G(z_0)`, so that `G(z_0) = Id`.
pub fn normalize(g: &Jet) -> Option<Jet> {
    let li = g.h.cholesky()?.lower_inverse();
    let lh = li.adjoint();
    let t = |m: &CMat| li * *m * lh;
    Some(Jet {
        h: t(&g.h),
        d: g.d.iter().map(t).collect(),
        dd: g.dd.iter().map(t).collect(),
    })
}

/// Complex Hessian `∂_α ∂bar_β φ` in coordinates `(z_1..z_n, t_1..t_{r-1})` at one fiber
/// point of the affine chart of `node`, row-major of size `n + r - 1`.
pub fn hessian(g: &Jet, node: &FiberNode) -> Vec<C> {
    let m = g.dim() + g.rank() - 1;
    let mut out = vec![C::new(0.0, 0.0); m * m];
    hessian_into(g, node, &mut out);
    out
}

/// [`hessian`] into a caller-owned buffer of length `(n + r - 1)²`.
pub fn hessian_into(g: &Jet, node: &FiberNode, out: &mut [C]) {
    let n = g.dim();
    let r = g.rank();
    let m = n + r - 1;
    let w = &node.w;
    let zero = C::new(0.0, 0.0);
    let mut gw = [zero; MAX];
    mat_vec_into(&g.h, w, &mut gw);
    let q = dot(w, &gw[..r]).re;
    let mut slots = [0usize; MAX];
    for (p, s) in node.fiber_slots().enumerate() {
        slots[p] = s;
    }
    // qa[α] = Q_α; dgw[a] = (∂_a G) w
    let mut qa = vec![zero; m];
    let mut dgw = vec![[zero; MAX]; n];
    for a in 0..n {
        mat_vec_into(&g.d[a], w, &mut dgw[a]);
        qa[a] = dot(w, &dgw[a][..r]);
    }
    for p in 0..r - 1 {
        // (w^H G)_s
        qa[n + p] = gw[slots[p]].conj();
    }
    let mut tmp = [zero; MAX];
    for al in 0..m {
        for be in 0..m {
            let qab = match (al < n, be < n) {
                (true, true) => {
                    mat_vec_into(&g.dd[al * n + be], w, &mut tmp);
                    dot(w, &tmp[..r])
                }
                // ∂_a ∂bar_{t_q} Q = (∂_a G w)_{s_q}
                (true, false) => dgw[al][slots[be - n]],
                // ∂_{t_p} ∂bar_b Q = conj((∂_b G w)_{s_p})
                (false, true) => dgw[be][slots[al - n]].conj(),
                (false, false) => g.h.get(slots[be - n], slots[al - n]),
            };
            out[al * m + be] = qab / q - qa[al] * qa[be].conj() / (q * q);
        }
    }
}

fn mat_vec_into(m: &CMat, v: &[C], out: &mut [C]) {
    for (i, o) in out.iter_mut().enumerate().take(v.len()) {
        *o = (0..v.len()).map(|j| m.get(i, j) * v[j]).sum();
    }
}


/// `u^H v`.
fn dot(u: &[C], v: &[C]) -> C {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}
