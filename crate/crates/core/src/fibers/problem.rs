use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibers::split::{build_split, SplitSpace};
use crate::linalg::{self, DenseOperator};
use crate::nonlinear::NonlinearMap;
use crate::operators::{ModelOperator, RFormProblem};
use crate::spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    /// `F(u) = L u − P(u)`.
    MForm,
    /// `F(y) = y − P(T y)`.
    RForm,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LinearPart {
    M(ModelOperator),
    R(RFormProblem),
}

/// A map `F` together with its splitting and the data the slice solver needs.
#[derive(Debug, Clone)]
pub struct FoldProblem {
    pub form: Form,
    pub linear: LinearPart,
    pub map: NonlinearMap,
    pub split: SplitSpace,
    /// Translation `γ` applied to `L` and `P` before slice inversion (m-form).
    pub gamma_center: f64,
    /// Bound `b̂` on `‖Π_W (G − γ)‖` over all linearizations.
    pub half_width: f64,
    /// `b̂ · ‖L̂_W⁻¹‖` (m-form only).
    pub contraction: Option<f64>,
    matrix: DenseOperator,
    centered: Option<DenseOperator>,
    slice_inverse: Option<DenseOperator>,
    spectrum: Vec<f64>,
}

impl FoldProblem {
    /// `F = L − P` for self-adjoint `L`, centred by the midpoint of the
    /// linearizations' spectral enclosure.
    pub fn m_form(model: ModelOperator, map: NonlinearMap) -> Result<Self> {
        if !model.self_adjoint {
            return Err(Error::WrongForm("a self-adjoint linear part for the m-form".into()));
        }
        if map.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: map.dim(),
            });
        }
        let (gamma, half_width) = match &map {
            NonlinearMap::VerticalSine { lambda_m, .. } => (*lambda_m, 0.0),
            _ => match map.linearization_bounds() {
                Some((lo, hi)) => (0.5 * (lo + hi), 0.5 * (hi - lo)),
                None => return Err(Error::WrongForm("symmetric linearizations for the m-form".into())),
            },
        };
        let split = build_split(&model.triple)?;
        let eig = spectral::symmetric_eigendecompose(&model.l, 1e-15)?;
        let n = model.dim();
        let scale = eig.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let mut worst = 0.0f64;
        let mut inv_eigs = vec![0.0; n];
        for (inv, ev) in inv_eigs.iter_mut().zip(&eig.eigenvalues).skip(1) {
            let d = ev - gamma;
            if d.abs() <= 1e-12 * scale {
                return Err(Error::NotAContraction(f64::INFINITY));
            }
            *inv = 1.0 / d;
            worst = worst.max(1.0 / d.abs());
        }
        let c = half_width * worst;
        if c >= 1.0 {
            return Err(Error::NotAContraction(c));
        }
        let slice_inverse = eig.apply_function_indexed(|k, _| inv_eigs[k]);
        Ok(Self {
            form: Form::MForm,
            matrix: model.l.clone(),
            centered: Some(model.l.shift(-gamma)),
            spectrum: eig.eigenvalues,
            linear: LinearPart::M(model),
            map,
            split,
            gamma_center: gamma,
            half_width,
            contraction: Some(c),
            slice_inverse: Some(slice_inverse),
        })
    }

    /// `F = I − P ∘ T`.
    pub fn r_form(r: RFormProblem, map: NonlinearMap) -> Result<Self> {
        if map.dim() != r.t.dim() {
            return Err(Error::DimensionMismatch {
                expected: r.t.dim(),
                got: map.dim(),
            });
        }
        let split = build_split(&r.triple)?;
        let half_width = match map.profile() {
            Some(p) => p.b - 1.0,
            None => f64::NAN,
        };
        Ok(Self {
            form: Form::RForm,
            matrix: r.t.clone(),
            centered: None,
            spectrum: Vec::new(),
            linear: LinearPart::R(r),
            map,
            split,
            gamma_center: 0.0,
            half_width,
            contraction: None,
            slice_inverse: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `L` (m-form) or `T` (r-form).
    pub fn linear_matrix(&self) -> &DenseOperator {
        &self.matrix
    }

    /// Eigenvalues of `L`, ascending (m-form only).
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn lambda_m(&self) -> f64 {
        match &self.linear {
            LinearPart::M(m) => m.lambda_m(),
            LinearPart::R(r) => r.shift,
        }
    }

    pub fn mu_m(&self) -> f64 {
        match &self.linear {
            LinearPart::M(m) => m.mu_m(),
            LinearPart::R(r) => r.triple.gap_value,
        }
    }

    pub(crate) fn centered_linear(&self) -> Option<&DenseOperator> {
        self.centered.as_ref()
    }

    pub(crate) fn slice_inverse(&self) -> Option<&DenseOperator> {
        self.slice_inverse.as_ref()
    }

    /// Argument passed to `P`.
    pub fn inner(&self, u: &[f64]) -> Vec<f64> {
        match self.form {
            Form::MForm => u.to_vec(),
            Form::RForm => self.matrix.matvec(u),
        }
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        match self.form {
            Form::MForm => linalg::sub(&self.matrix.matvec(u), &self.map.eval(u)),
            Form::RForm => linalg::sub(u, &self.map.eval(&self.matrix.matvec(u))),
        }
    }

    /// `DF(u)`.
    pub fn jacobian(&self, u: &[f64]) -> DenseOperator {
        match self.form {
            Form::MForm => self.matrix.sub(&self.map.jacobian(u)),
            Form::RForm => {
                let k = self.map.jacobian(&self.matrix.matvec(u)).matmul(&self.matrix);
                DenseOperator::identity(self.dim()).sub(&k)
            }
        }
    }

    /// `J(Tu) T` (r-form).
    pub fn compact_part(&self, u: &[f64]) -> DenseOperator {
        self.map.jacobian(&self.matrix.matvec(u)).matmul(&self.matrix)
    }

    /// `P̂(u) = P(u) − γ u`.
    pub fn centered_map(&self, u: &[f64]) -> Vec<f64> {
        linalg::add_scaled(&self.map.eval(u), -self.gamma_center, u)
    }

    pub fn height_of(&self, u: &[f64]) -> f64 {
        self.split.height(&self.eval(u))
    }

    /// Critical spectral value at `u`: lowest eigenvalue of `DF(u)` (m-form)
    /// or `1 − r(J(Tu) T)` (r-form). The vector is a warm start for the next
    /// call.
    pub fn lambda(&self, u: &[f64], start: Option<&[f64]>) -> Result<(f64, Vec<f64>)> {
        match self.form {
            Form::MForm => spectral::lowest_eigenpair(&self.jacobian(u).symmetrized(), start),
            Form::RForm => {
                let k = self.compact_part(u);
                let n = self.dim();
                let fallback = vec![1.0; n];
                let s = start.filter(|s| s.iter().all(|x| *x > 0.0)).unwrap_or(&fallback);
                let norm = k.inf_norm().max(1e-300);
                let res = spectral::power_iterate(|x| k.matvec(x), s, 1e-13 * norm, 100_000)?;
                Ok((1.0 - res.value, res.vector))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nonlinear::{linear_map, make_convex_profile, nemitskii};
    use crate::operators::{build_model_operator, ProblemSpec};

    pub(crate) fn dirichlet(n: usize) -> ModelOperator {
        build_model_operator(&serde_json::from_str::<ProblemSpec>(&format!(r#"{{"kind":"dirichlet_laplacian_1d","n":{n}}}"#)).unwrap()).unwrap()
    }

    #[test]
    fn centred_contraction_constant() {
        let p = FoldProblem::m_form(dirichlet(3), nemitskii(make_convex_profile(5.0, 15.0, 1.0).unwrap(), 3).unwrap()).unwrap();
        assert_eq!(p.gamma_center, 10.0);
        assert_eq!(p.half_width, 5.0);
        assert!((p.contraction.unwrap() - 5.0 / 22.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_contraction() {
        let m = dirichlet(3);
        let wide = make_convex_profile(0.0, 80.0, 1.0).unwrap();
        assert!(matches!(FoldProblem::m_form(m, nemitskii(wide, 3).unwrap()), Err(Error::NotAContraction(_))));
    }

    #[test]
    fn slice_inverse_inverts_on_w() {
        let p = FoldProblem::m_form(dirichlet(5), linear_map(&DenseOperator::zeros(5))).unwrap();
        let w = p.split.project_w(&[1.0, -2.0, 0.5, 3.0, 0.0]);
        let back = p.slice_inverse().unwrap().matvec(&p.centered_linear().unwrap().matvec(&w));
        assert!(linalg::distance(&back, &w) < 1e-12);
        assert!(p.slice_inverse().unwrap().matvec(&p.split.phi).iter().all(|x| x.abs() < 1e-12));
    }
}
