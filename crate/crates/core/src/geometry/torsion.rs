use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::chart::{metric_fd_step, Chart};
use super::decompose::cartan_decompose;
use crate::error::Result;
use crate::tensor::{Tensor3, Tensor4};

pub type VectorFn = dyn Fn(&[f64]) -> Vec<f64> + Send + Sync;
pub type CoeffFn = dyn Fn(&[f64]) -> Tensor3 + Send + Sync;

/// Torsion endomorphism at a point.
///
/// `lowered[(x, y, z)] = A_{xyz} = ⟨A(∂_x, ∂_y), ∂_z⟩` and
/// `raised[(a, b, c)] = A^a_{bc}`, the `a`-component of `A(∂_b, ∂_c)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorsionCoeffs {
    pub lowered: Tensor3,
    pub raised: Tensor3,
}

impl TorsionCoeffs {
    pub fn zeros(n: usize) -> Self {
        Self {
            lowered: Tensor3::zeros(n),
            raised: Tensor3::zeros(n),
        }
    }

    pub fn from_lowered(lowered: Tensor3, hinv: &DMatrix<f64>) -> Self {
        let n = lowered.dim();
        let raised = Tensor3::from_fn(n, |a, b, c| {
            (0..n).map(|d| hinv[(a, d)] * lowered[(b, c, d)]).sum()
        });
        Self { lowered, raised }
    }

    pub fn dim(&self) -> usize {
        self.lowered.dim()
    }

    /// `A(u, v)` as a vector.
    pub fn apply(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        self.raised.contract(u, v)
    }

    /// Largest `|A_{xyz} + A_{xzy}|`.
    pub fn skew_violation(&self) -> f64 {
        let n = self.dim();
        let mut worst: f64 = 0.0;
        for x in 0..n {
            for y in 0..n {
                for z in 0..n {
                    worst = worst.max((self.lowered[(x, y, z)] + self.lowered[(x, z, y)]).abs());
                }
            }
        }
        worst
    }
}

/// Position-dependent torsion endomorphism, classified by its Cartan type.
#[derive(Clone)]
pub enum TorsionField {
    Zero,
    /// `A(X, Y) = ⟨X, Y⟩V − ⟨V, Y⟩X`; the closure returns the components `V^a`.
    Vectorial(Arc<VectorFn>),
    /// Three-form coefficients `T_{xyz}`; fully antisymmetrized on evaluation.
    Antisymmetric(Arc<CoeffFn>),
    /// Lowered coefficients projected onto the Cartan-type class on evaluation.
    Cartan(Arc<CoeffFn>),
    /// Lowered coefficients, skew-symmetrized in the last two slots on evaluation.
    General(Arc<CoeffFn>),
}

impl fmt::Debug for TorsionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Zero => "TorsionField::Zero",
            Self::Vectorial(_) => "TorsionField::Vectorial",
            Self::Antisymmetric(_) => "TorsionField::Antisymmetric",
            Self::Cartan(_) => "TorsionField::Cartan",
            Self::General(_) => "TorsionField::General",
        })
    }
}

impl TorsionField {
    pub fn vectorial(v: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        Self::Vectorial(Arc::new(v))
    }

    pub fn vectorial_const(v: Vec<f64>) -> Self {
        Self::vectorial(move |_| v.clone())
    }

    pub fn antisymmetric(t: impl Fn(&[f64]) -> Tensor3 + Send + Sync + 'static) -> Self {
        Self::Antisymmetric(Arc::new(t))
    }

    pub fn cartan(s: impl Fn(&[f64]) -> Tensor3 + Send + Sync + 'static) -> Self {
        Self::Cartan(Arc::new(s))
    }

    pub fn general(a: impl Fn(&[f64]) -> Tensor3 + Send + Sync + 'static) -> Self {
        Self::General(Arc::new(a))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::Zero => "zero",
            Self::Vectorial(_) => "vectorial",
            Self::Antisymmetric(_) => "antisymmetric",
            Self::Cartan(_) => "cartan",
            Self::General(_) => "general",
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    /// The field `s·A`, same kind.
    pub fn scaled(&self, s: f64) -> Self {
        match self {
            Self::Zero => Self::Zero,
            Self::Vectorial(v) => {
                let v = v.clone();
                Self::vectorial(move |y| v(y).into_iter().map(|c| c * s).collect())
            }
            Self::Antisymmetric(t) => {
                let t = t.clone();
                Self::antisymmetric(move |y| t(y).scaled(s))
            }
            Self::Cartan(t) => {
                let t = t.clone();
                Self::cartan(move |y| t(y).scaled(s))
            }
            Self::General(t) => {
                let t = t.clone();
                Self::general(move |y| t(y).scaled(s))
            }
        }
    }

    /// Coefficients at `y`. Skew-adjointness holds by construction for every kind.
    pub fn eval(&self, chart: &Chart, y: &[f64]) -> Result<TorsionCoeffs> {
        let h = chart.metric(y)?;
        let hinv = chart.inverse_metric(y)?;
        Ok(self.eval_with_metric(y, &h, &hinv))
    }

    pub(crate) fn eval_with_metric(
        &self,
        y: &[f64],
        h: &DMatrix<f64>,
        hinv: &DMatrix<f64>,
    ) -> TorsionCoeffs {
        let n = h.nrows();
        let lowered = match self {
            Self::Zero => return TorsionCoeffs::zeros(n),
            Self::Vectorial(v) => vectorial_lowered(h, &v(y)),
            Self::Antisymmetric(t) => full_antisymmetrization(&t(y)),
            Self::General(a) => skew_last_two(&a(y)),
            Self::Cartan(s) => {
                let a = skew_last_two(&s(y));
                let parts = cartan_decompose(&TorsionCoeffs::from_lowered(a, hinv), h)
                    .expect("skew-symmetrized coefficients are admissible");
                return parts.cartan_part;
            }
        };
        TorsionCoeffs::from_lowered(lowered, hinv)
    }
}

/// `A_{xyz} = h_{xy} V_z − h_{xz} V_y` with `V_z = h_{zw} V^w`.
pub fn vectorial_lowered(h: &DMatrix<f64>, v_up: &[f64]) -> Tensor3 {
    let n = h.nrows();
    let v_low: Vec<f64> = (0..n)
        .map(|z| (0..n).map(|w| h[(z, w)] * v_up[w]).sum())
        .collect();
    Tensor3::from_fn(n, |x, y, z| h[(x, y)] * v_low[z] - h[(x, z)] * v_low[y])
}

pub fn skew_last_two(a: &Tensor3) -> Tensor3 {
    Tensor3::from_fn(a.dim(), |x, y, z| 0.5 * (a[(x, y, z)] - a[(x, z, y)]))
}

pub fn full_antisymmetrization(t: &Tensor3) -> Tensor3 {
    Tensor3::from_fn(t.dim(), |x, y, z| {
        (t[(x, y, z)] + t[(y, z, x)] + t[(z, x, y)] - t[(y, x, z)] - t[(x, z, y)] - t[(z, y, x)])
            / 6.0
    })
}

/// Torsion tensor `T^a_{bc} = A^a_{bc} − A^a_{cb}`, i.e. `T(X, Y) = A(X, Y) − A(Y, X)`.
pub fn torsion_tensor(a: &TorsionCoeffs) -> Tensor3 {
    let r = &a.raised;
    Tensor3::from_fn(a.dim(), |x, y, z| r[(x, y, z)] - r[(x, z, y)])
}

/// Stencil used for derivatives of torsion coefficients and Christoffel symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Central2,
    Central4,
}

impl Stencil {
    pub fn reach(self) -> f64 {
        match self {
            Self::Central2 => 1.0,
            Self::Central4 => 2.0,
        }
    }

    /// Derivative of `f` along coordinate `m` at `y`, with `f` returning a flat array.
    pub(crate) fn derivative(
        self,
        y: &[f64],
        m: usize,
        step: f64,
        mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    ) -> Result<Vec<f64>> {
        let mut yp = y.to_vec();
        let mut at = |off: f64| -> Result<Vec<f64>> {
            yp[m] = y[m] + off;
            f(&yp)
        };
        match self {
            Self::Central2 => {
                let p = at(step)?;
                let q = at(-step)?;
                Ok(p.iter()
                    .zip(&q)
                    .map(|(p, q)| (p - q) / (2.0 * step))
                    .collect())
            }
            Self::Central4 => {
                let p1 = at(step)?;
                let m1 = at(-step)?;
                let p2 = at(2.0 * step)?;
                let m2 = at(-2.0 * step)?;
                Ok((0..p1.len())
                    .map(|i| (8.0 * (p1[i] - m1[i]) - (p2[i] - m2[i])) / (12.0 * step))
                    .collect())
            }
        }
    }
}

/// `(∇^LC_m A)^a_{bc}` stored at `[(m, a, b, c)]`, from finite differences of the
/// raised coefficients plus Christoffel corrections.
pub fn lc_derivative(
    field: &TorsionField,
    chart: &Chart,
    y: &[f64],
    step: f64,
    stencil: Stencil,
) -> Result<Tensor4> {
    let n = chart.dim();
    let mut out = Tensor4::zeros(n);
    if field.is_zero() {
        return Ok(out);
    }
    let margin = stencil.reach() * step + metric_fd_step(y);
    chart.check_inside(y, margin)?;
    let a = field.eval(chart, y)?.raised;
    let gamma = chart.christoffel(y)?;
    for m in 0..n {
        let da = stencil.derivative(y, m, step, |p| {
            Ok(field.eval(chart, p)?.raised.as_slice().to_vec())
        })?;
        let da = Tensor3::from_vec(n, da);
        for x in 0..n {
            for b in 0..n {
                for c in 0..n {
                    let mut s = da[(x, b, c)];
                    for e in 0..n {
                        s += gamma[(x, m, e)] * a[(e, b, c)]
                            - gamma[(e, m, b)] * a[(x, e, c)]
                            - gamma[(e, m, c)] * a[(x, b, e)];
                    }
                    out[(m, x, b, c)] = s;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rand_tensor(n: usize, seed: u64) -> Tensor3 {
        let mut s = seed;
        Tensor3::from_fn(n, |_, _, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn zero_and_null_vector_give_zero_coefficients() {
        let chart = Chart::flat(3);
        let y = [0.1, 0.2, 0.3];
        assert_eq!(
            TorsionField::Zero
                .eval(&chart, &y)
                .unwrap()
                .lowered
                .max_abs(),
            0.0
        );
        let v0 = TorsionField::vectorial_const(vec![0.0; 3]);
        assert_eq!(v0.eval(&chart, &y).unwrap().lowered.max_abs(), 0.0);
    }

    #[test]
    fn vectorial_matches_defining_formula_over_all_triples() {
        let chart = Chart::flat(2);
        let a = TorsionField::vectorial_const(vec![1.0, 0.0])
            .eval(&chart, &[0.0, 0.0])
            .unwrap();
        let basis = |i: usize| {
            let mut e = vec![0.0; 2];
            e[i] = 1.0;
            e
        };
        let dot = |u: &[f64], v: &[f64]| u[0] * v[0] + u[1] * v[1];
        let v = [1.0, 0.0];
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    let (ex, ey, ez) = (basis(x), basis(y), basis(z));
                    let expected = dot(&ex, &ey) * dot(&v, &ez) - dot(&ex, &ez) * dot(&v, &ey);
                    assert_eq!(a.lowered[(x, y, z)], expected, "({x},{y},{z})");
                }
            }
        }
        assert_eq!(a.lowered[(1, 0, 1)], -1.0);
        assert_eq!(a.lowered[(0, 1, 1)], 0.0);
        assert_eq!(a.lowered[(1, 1, 0)], 1.0);
        assert_eq!(a.lowered[(0, 0, 0)], 0.0);
    }

    #[test]
    fn every_kind_is_skew_adjoint_on_a_curved_chart() {
        let chart = Chart::sphere2();
        let y = [1.0, 0.4];
        let fields = [
            TorsionField::vectorial(|y| vec![y[1].cos(), 0.3]),
            TorsionField::antisymmetric(|_| rand_tensor(2, 3)),
            TorsionField::cartan(|_| rand_tensor(2, 5)),
            TorsionField::general(|_| rand_tensor(2, 7)),
        ];
        for f in &fields {
            let a = f.eval(&chart, &y).unwrap();
            assert!(a.skew_violation() < 1e-15, "{f:?}");
        }
    }

    #[test]
    fn antisymmetric_kind_is_totally_antisymmetric() {
        let chart = Chart::flat(4);
        let a = TorsionField::antisymmetric(|_| rand_tensor(4, 11))
            .eval(&chart, &[0.0; 4])
            .unwrap();
        let l = &a.lowered;
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    assert_abs_diff_eq!(l[(x, y, z)], -l[(y, x, z)], epsilon = 1e-15);
                    assert_abs_diff_eq!(l[(x, y, z)], l[(y, z, x)], epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn torsion_tensor_cases() {
        let chart = Chart::flat(3);
        let y = [0.0; 3];
        assert_eq!(torsion_tensor(&TorsionCoeffs::zeros(3)).max_abs(), 0.0);

        // A symmetric in its two vector slots has vanishing torsion tensor.
        let sym = Tensor3::from_fn(3, |a, b, c| (a + 1) as f64 * ((b + 1) * (c + 1)) as f64);
        let coeffs = TorsionCoeffs {
            lowered: sym.clone(),
            raised: sym,
        };
        assert_eq!(torsion_tensor(&coeffs).max_abs(), 0.0);

        // Vectorial: T(X, Y) = ⟨V, X⟩Y − ⟨V, Y⟩X.
        let v = [0.3, -1.2, 0.7];
        let a = TorsionField::vectorial_const(v.to_vec())
            .eval(&chart, &y)
            .unwrap();
        let t = torsion_tensor(&a);
        for x in 0..3 {
            for b in 0..3 {
                for c in 0..3 {
                    let kron = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
                    let expected = v[b] * kron(x, c) - v[c] * kron(x, b);
                    assert_abs_diff_eq!(t[(x, b, c)], expected, epsilon = 1e-15);
                }
            }
        }
    }

    #[test]
    fn covariant_derivative_of_constant_flat_field_vanishes() {
        let chart = Chart::flat(3);
        let f = TorsionField::vectorial_const(vec![1.0, 0.0, 0.0]);
        let d = lc_derivative(&f, &chart, &[0.2, 0.1, 0.0], 1e-3, Stencil::Central2).unwrap();
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn fourth_order_stencil_is_more_accurate() {
        let chart = Chart::flat(2);
        let f = TorsionField::vectorial(|y| vec![y[0].sin(), 0.0]);
        let y = [0.7, 0.0];
        let exact = 0.7f64.cos();
        // A(∂1, ∂1) = V, so A^0_{11} = sin y⁰
        let d2 = lc_derivative(&f, &chart, &y, 1e-2, Stencil::Central2).unwrap();
        let d4 = lc_derivative(&f, &chart, &y, 1e-2, Stencil::Central4).unwrap();
        let e2 = (d2[(0, 0, 1, 1)] - exact).abs();
        let e4 = (d4[(0, 0, 1, 1)] - exact).abs();
        assert!(e2 > 1e-6 && e2 < 1e-4, "{e2}");
        assert!(e4 < 1e-9, "{e4}");
    }
}
