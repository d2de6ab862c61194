//! Closed-form inference for linear-Gaussian structural models.
//!
//! With `S = (I - B)^-1` the observables are Gaussian with mean `S μ_ε` and
//! covariance `S Σ_εε Sᵗ`. Conditioning uses the usual Gaussian update with a
//! symmetric pseudo-inverse of the observed block. An action `do(z = a)`
//! zeroes the rows of `B` for `z` and pins `z` to `a`; a counterfactual first
//! conditions the disturbances on the (pre-action) observations and then runs
//! the action against that posterior.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, SymmetricPinv};
use crate::model::{analyze, partition, prune, Assignment, GaussianMoments, LinearScm, Tolerances};

/// How the pseudo-inverse treated an observed covariance block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RankDecision {
    pub observed: usize,
    pub retained_rank: usize,
    pub largest_eigenvalue: f64,
}

/// Disturbance distribution after conditioning on observations.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbancePosterior {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub conditioned_on: Assignment,
    pub rank: RankDecision,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct GaussianEngine {
    pub tol: Tolerances,
}

impl GaussianEngine {
    pub fn new(tol: Tolerances) -> Self {
        Self { tol }
    }

    /// Validates the model and returns `S = (I - B)^-1`.
    fn solve_matrix(&self, model: &LinearScm) -> Result<DMatrix<f64>> {
        let (report, inverse) = analyze(model, &self.tol);
        if !report.passed {
            if !report.nonsingular(&self.tol) {
                return Err(Error::Singular {
                    matrix: "I - B",
                    rcond: report.rcond,
                    floor: self.tol.rcond_floor,
                });
            }
            return Err(Error::InvalidModel(report.diagnostics.join("; ")));
        }
        Ok(inverse.expect("nonsingular model has an inverse"))
    }

    /// Like [`Self::solve_matrix`] but tolerates a singular `I - B`, which an
    /// intervention may cut away.
    fn check_disturbances(&self, model: &LinearScm) -> Result<()> {
        let (report, _) = analyze(model, &self.tol);
        let blocking: Vec<String> = report
            .diagnostics
            .into_iter()
            .filter(|d| !d.starts_with("I - B is singular"))
            .collect();
        if blocking.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidModel(blocking.join("; ")))
        }
    }

    pub fn prior_moments(&self, model: &LinearScm) -> Result<GaussianMoments> {
        let s = self.solve_matrix(model)?;
        let mean = &s * model.dist_mean();
        let mut cov = &s * model.dist_cov() * s.transpose();
        linalg::symmetrize(&mut cov);
        Ok(GaussianMoments {
            variables: model.variables().to_vec(),
            mean,
            cov,
        })
    }

    /// Distribution of all variables given the observations. Observed
    /// variables come back with their observed value and zero variance.
    pub fn condition(
        &self,
        model: &LinearScm,
        observations: &Assignment,
    ) -> Result<GaussianMoments> {
        let prior = self.prior_moments(model)?;
        if observations.is_empty() {
            return Ok(prior);
        }
        let (idx, values) = observed(model, observations)?;
        let all: Vec<usize> = (0..model.len()).collect();

        let sigma_oo = linalg::select(&prior.cov, &idx, &idx);
        let sigma_xo = linalg::select(&prior.cov, &all, &idx);
        let residual = &values - linalg::select_vec(&prior.mean, &idx);
        let pinv = self.pinv_checked(model, &idx, &sigma_oo, &residual, &values, &prior.mean)?;

        let gain = &sigma_xo * &pinv.pinv;
        let mut mean = &prior.mean + &gain * residual;
        let mut cov = &prior.cov - &gain * sigma_xo.transpose();
        linalg::symmetrize(&mut cov);
        for (k, &i) in idx.iter().enumerate() {
            mean[i] = values[k];
            cov.row_mut(i).fill(0.0);
            cov.column_mut(i).fill(0.0);
        }
        Ok(GaussianMoments {
            variables: prior.variables,
            mean,
            cov,
        })
    }

    /// Distribution of all variables under `do(action)` with the prior
    /// disturbances.
    pub fn intervene(&self, model: &LinearScm, action: &Assignment) -> Result<GaussianMoments> {
        if action.is_empty() {
            return self.prior_moments(model);
        }
        self.check_disturbances(model)?;
        self.intervene_with(model, action, model.dist_mean(), model.dist_cov())
    }

    /// Posterior of the disturbances given the observations, computed through
    /// the rows of `S` belonging to the observed variables.
    pub fn abduct_disturbances(
        &self,
        model: &LinearScm,
        observations: &Assignment,
    ) -> Result<DisturbancePosterior> {
        let s = self.solve_matrix(model)?;
        let (idx, values) = observed(model, observations)?;
        let mu = model.dist_mean();
        let sigma = model.dist_cov();
        if idx.is_empty() {
            return Ok(DisturbancePosterior {
                mean: mu.clone(),
                cov: sigma.clone(),
                conditioned_on: observations.clone(),
                rank: RankDecision {
                    observed: 0,
                    retained_rank: 0,
                    largest_eigenvalue: 0.0,
                },
            });
        }

        let all: Vec<usize> = (0..model.len()).collect();
        let s_o = linalg::select(&s, &idx, &all);
        let mu_x = &s * mu;
        let mu_o = &s_o * mu;
        let cross = sigma * s_o.transpose();
        let sigma_oo = &s_o * &cross;
        let residual = &values - &mu_o;
        let pinv = self.pinv_checked(model, &idx, &sigma_oo, &residual, &values, &mu_x)?;

        let gain = &cross * &pinv.pinv;
        let mean = mu + &gain * residual;
        let mut cov = sigma - &gain * cross.transpose();
        linalg::symmetrize(&mut cov);
        Ok(DisturbancePosterior {
            mean,
            cov,
            conditioned_on: observations.clone(),
            rank: RankDecision {
                observed: idx.len(),
                retained_rank: pinv.rank,
                largest_eigenvalue: pinv.largest_eigenvalue,
            },
        })
    }

    /// Observations are read as facts about the pre-action world: they update
    /// the disturbances, then the action replaces the equations of its
    /// variables. A variable that is both observed and forced contributes its
    /// observation to the update and takes the forced value afterwards.
    pub fn counterfactual(
        &self,
        model: &LinearScm,
        observations: &Assignment,
        action: &Assignment,
    ) -> Result<GaussianMoments> {
        if observations.is_empty() {
            return self.intervene(model, action);
        }
        let posterior = self.abduct_disturbances(model, observations)?;
        self.intervene_with(model, action, &posterior.mean, &posterior.cov)
    }

    fn intervene_with(
        &self,
        model: &LinearScm,
        action: &Assignment,
        eps_mean: &DVector<f64>,
        eps_cov: &DMatrix<f64>,
    ) -> Result<GaussianMoments> {
        let part = partition(model, action.keys())?;
        let n = model.len();
        let forced = DVector::from_iterator(
            part.z.len(),
            part.z.iter().map(|&i| action[&model.variables()[i]]),
        );

        let mut mean = DVector::zeros(n);
        let mut cov = DMatrix::zeros(n, n);
        if !part.y.is_empty() {
            let k = part.y.len();
            let (rcond, inv) = linalg::inverse_with_rcond(&(DMatrix::identity(k, k) - &part.b_yy));
            let inv = match inv {
                Some(inv) if rcond >= self.tol.rcond_floor => inv,
                _ => {
                    return Err(Error::Singular {
                        matrix: "I - B_yy",
                        rcond,
                        floor: self.tol.rcond_floor,
                    })
                }
            };
            let mu_y = linalg::select_vec(eps_mean, &part.y) + &part.b_yz * &forced;
            let mean_y = &inv * mu_y;
            let mut cov_yy = &inv * linalg::select(eps_cov, &part.y, &part.y) * inv.transpose();
            linalg::symmetrize(&mut cov_yy);
            for (a, &i) in part.y.iter().enumerate() {
                mean[i] = mean_y[a];
                for (b, &j) in part.y.iter().enumerate() {
                    cov[(i, j)] = cov_yy[(a, b)];
                }
            }
        }
        for (k, &i) in part.z.iter().enumerate() {
            mean[i] = forced[k];
        }
        Ok(GaussianMoments {
            variables: model.variables().to_vec(),
            mean,
            cov,
        })
    }

    /// Pseudo-inverse of an observed covariance block, rejecting residuals
    /// that fall outside its range.
    fn pinv_checked(
        &self,
        model: &LinearScm,
        idx: &[usize],
        block: &DMatrix<f64>,
        residual: &DVector<f64>,
        values: &DVector<f64>,
        means: &DVector<f64>,
    ) -> Result<SymmetricPinv> {
        let pinv = linalg::symmetric_pinv(block, self.tol.pinv_rel);
        let off = pinv.off_range(residual);
        let scale = idx
            .iter()
            .map(|&i| means[i].abs())
            .chain(values.iter().map(|v| v.abs()))
            .fold(1.0_f64, f64::max);
        if off.amax() > self.tol.residual_rel * scale {
            let names: Vec<String> = idx
                .iter()
                .map(|&i| model.variables()[i].to_string())
                .collect();
            return Err(Error::ContradictoryEvidence(format!(
                "observed values of {} are impossible under the model (residual {:e} outside the reachable range)",
                names.join(", "),
                off.amax()
            )));
        }
        Ok(pinv)
    }
}

/// The mutilated model for `do(action)`: intervened rows of `B` are zeroed and
/// their disturbances replaced by the point mass at the forced value. Its
/// prior moments coincide with [`intervene`].
pub fn post_intervention_model(model: &LinearScm, action: &Assignment) -> Result<LinearScm> {
    let pruned = prune(model, action.keys())?;
    let z = model.indices(action.keys())?;
    let mut mean = model.dist_mean().clone();
    let mut cov = model.dist_cov().clone();
    for &i in &z {
        mean[i] = action[&model.variables()[i]];
        cov.row_mut(i).fill(0.0);
        cov.column_mut(i).fill(0.0);
    }
    LinearScm::new(model.variables().to_vec(), pruned, mean, cov)
}

fn observed(model: &LinearScm, observations: &Assignment) -> Result<(Vec<usize>, DVector<f64>)> {
    let idx = model.indices(observations.keys())?;
    for v in observations.values() {
        if !v.is_finite() {
            return Err(Error::Query(format!("observed value {v} is not finite")));
        }
    }
    let values = DVector::from_iterator(
        idx.len(),
        idx.iter().map(|&i| observations[&model.variables()[i]]),
    );
    Ok((idx, values))
}

pub fn prior_moments(model: &LinearScm) -> Result<GaussianMoments> {
    GaussianEngine::default().prior_moments(model)
}

pub fn condition(model: &LinearScm, observations: &Assignment) -> Result<GaussianMoments> {
    GaussianEngine::default().condition(model, observations)
}

pub fn intervene(model: &LinearScm, action: &Assignment) -> Result<GaussianMoments> {
    GaussianEngine::default().intervene(model, action)
}

pub fn abduct_disturbances(
    model: &LinearScm,
    observations: &Assignment,
) -> Result<DisturbancePosterior> {
    GaussianEngine::default().abduct_disturbances(model, observations)
}

pub fn counterfactual(
    model: &LinearScm,
    observations: &Assignment,
    action: &Assignment,
) -> Result<GaussianMoments> {
    GaussianEngine::default().counterfactual(model, observations, action)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::VariableId;
    use approx::assert_abs_diff_eq;

    fn coffee() -> LinearScm {
        LinearScm::new(
            ["p", "q", "r"]
                .iter()
                .map(|n| VariableId::new(*n).unwrap())
                .collect(),
            DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.0, -1.8, 0.0, 0.0, 1.0, 0.0, 0.0]),
            DVector::from_vec(vec![0.0, 19.0, 3.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 3.0, 2.0])),
        )
        .unwrap()
    }

    fn assign(pairs: &[(&str, f64)]) -> Assignment {
        pairs
            .iter()
            .map(|(k, v)| (VariableId::new(*k).unwrap(), *v))
            .collect()
    }

    #[test]
    fn prior_of_coffee_model() {
        let m = prior_moments(&coffee()).unwrap();
        assert_abs_diff_eq!(
            m.mean,
            DVector::from_vec(vec![5.0, 10.0, 8.0]),
            epsilon = 1e-12
        );
        let want = DMatrix::from_row_slice(
            3,
            3,
            &[0.48, -0.08, 0.48, -0.08, 1.73, -0.08, 0.48, -0.08, 2.48],
        );
        assert_abs_diff_eq!(m.cov, want, epsilon = 0.01);
    }

    #[test]
    fn prior_of_exogenous_model_is_disturbance() {
        let model = LinearScm::new(
            vec![VariableId::new("a").unwrap(), VariableId::new("b").unwrap()],
            DMatrix::zeros(2, 2),
            DVector::from_vec(vec![1.5, -2.0]),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]),
        )
        .unwrap();
        let m = prior_moments(&model).unwrap();
        assert_eq!(m.mean, *model.dist_mean());
        assert_eq!(m.cov, *model.dist_cov());
    }

    #[test]
    fn conditioning_on_price() {
        let m = condition(&coffee(), &assign(&[("p", 7.0)])).unwrap();
        assert_abs_diff_eq!(
            m.mean,
            DVector::from_vec(vec![7.0, 9.66, 10.0]),
            epsilon = 0.01
        );
        let want = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 1.71, 0.0, 0.0, 0.0, 2.0]);
        assert_abs_diff_eq!(m.cov, want, epsilon = 0.01);
        assert_eq!(m.mean[0], 7.0);
        assert_eq!(m.cov.row(0).amax(), 0.0);
    }

    #[test]
    fn conditioning_on_tea_and_price() {
        let m = condition(&coffee(), &assign(&[("r", 4.0), ("p", 7.0)])).unwrap();
        assert_abs_diff_eq!(
            m.mean,
            DVector::from_vec(vec![7.0, 9.66, 4.0]),
            epsilon = 0.01
        );
        assert_abs_diff_eq!(m.variance_of("q").unwrap(), 1.71, epsilon = 0.01);
        assert_eq!(m.variance_of("r").unwrap(), 0.0);
    }

    #[test]
    fn conditioning_on_tea_moves_coffee_demand() {
        let m = condition(&coffee(), &assign(&[("r", 4.0)])).unwrap();
        assert_abs_diff_eq!(m.mean_of("q").unwrap(), 10.13, epsilon = 0.01);
    }

    #[test]
    fn empty_observation_is_prior() {
        let model = coffee();
        assert_eq!(
            condition(&model, &Assignment::new()).unwrap(),
            prior_moments(&model).unwrap()
        );
    }

    #[test]
    fn price_control_without_evidence() {
        let m = intervene(&coffee(), &assign(&[("p", 7.0)])).unwrap();
        assert_abs_diff_eq!(
            m.mean,
            DVector::from_vec(vec![7.0, 6.4, 10.0]),
            epsilon = 1e-12
        );
        let want = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 2.0]);
        assert_abs_diff_eq!(m.cov, want, epsilon = 1e-12);
    }

    #[test]
    fn full_intervention_is_deterministic() {
        let action = assign(&[("p", 7.0), ("q", 6.4), ("r", 10.0)]);
        let m = intervene(&coffee(), &action).unwrap();
        assert_eq!(m.mean, DVector::from_vec(vec![7.0, 6.4, 10.0]));
        assert_eq!(m.cov, DMatrix::zeros(3, 3));
    }

    #[test]
    fn empty_action_is_prior() {
        let model = coffee();
        assert_eq!(
            intervene(&model, &Assignment::new()).unwrap(),
            prior_moments(&model).unwrap()
        );
    }

    #[test]
    fn tea_observation_updates_coffee_shock() {
        // Hand-propagated values; plugging them into the action formula must
        // give the counterfactual mean 5.13.
        let post = abduct_disturbances(&coffee(), &assign(&[("r", 4.0)])).unwrap();
        assert_abs_diff_eq!(post.mean[1], 17.73, epsilon = 0.005);
        assert_abs_diff_eq!(post.cov[(1, 1)], 2.75, epsilon = 0.005);
        assert_abs_diff_eq!(-1.8 * 7.0 + post.mean[1], 5.13, epsilon = 0.005);
        assert_eq!(post.rank.retained_rank, 1);
    }

    #[test]
    fn empty_abduction_is_prior() {
        let model = coffee();
        let post = abduct_disturbances(&model, &Assignment::new()).unwrap();
        assert_eq!(post.mean, *model.dist_mean());
        assert_eq!(post.cov, *model.dist_cov());
    }

    #[test]
    fn price_control_given_tea_demand() {
        let m = counterfactual(&coffee(), &assign(&[("r", 4.0)]), &assign(&[("p", 7.0)])).unwrap();
        assert_abs_diff_eq!(
            m.mean,
            DVector::from_vec(vec![7.0, 5.13, 6.78]),
            epsilon = 0.01
        );
        let want =
            DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 2.75, -0.64, 0.0, -0.64, 0.39]);
        assert_abs_diff_eq!(m.cov, want, epsilon = 0.01);
    }

    #[test]
    fn price_control_matching_observed_price_reproduces_conditional() {
        // The forced price equals the observed one, so the action changes
        // nothing: coffee demand stays at its conditional value.
        let obs = assign(&[("r", 4.0), ("p", 7.0)]);
        let cf = counterfactual(&coffee(), &obs, &assign(&[("p", 7.0)])).unwrap();
        let cond = condition(&coffee(), &obs).unwrap();
        assert_abs_diff_eq!(
            cf.mean_of("q").unwrap(),
            cond.mean_of("q").unwrap(),
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(cf.mean_of("q").unwrap(), 9.657142857142857, epsilon = 1e-9);
    }

    #[test]
    fn counterfactual_with_nothing_is_prior() {
        let model = coffee();
        let empty = Assignment::new();
        assert_eq!(
            counterfactual(&model, &empty, &empty).unwrap(),
            prior_moments(&model).unwrap()
        );
    }

    #[test]
    fn contradictory_deterministic_observation() {
        // b is an exact copy of a.
        let model = LinearScm::new(
            vec![VariableId::new("a").unwrap(), VariableId::new("b").unwrap()],
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
        )
        .unwrap();
        let consistent = condition(&model, &assign(&[("a", 2.0), ("b", 2.0)])).unwrap();
        assert_eq!(consistent.mean, DVector::from_vec(vec![2.0, 2.0]));
        assert!(matches!(
            condition(&model, &assign(&[("a", 2.0), ("b", 3.0)])),
            Err(Error::ContradictoryEvidence(_))
        ));
        assert!(matches!(
            abduct_disturbances(&model, &assign(&[("a", 2.0), ("b", 3.0)])),
            Err(Error::ContradictoryEvidence(_))
        ));
        let post = abduct_disturbances(&model, &assign(&[("a", 2.0), ("b", 2.0)])).unwrap();
        assert_eq!(post.rank.observed, 2);
        assert_eq!(post.rank.retained_rank, 1);
    }

    #[test]
    fn singular_model_is_rejected() {
        let model = LinearScm::new(
            vec![VariableId::new("a").unwrap(), VariableId::new("b").unwrap()],
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
            DVector::zeros(2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        assert!(matches!(prior_moments(&model), Err(Error::Singular { .. })));
        // Forcing one side of the loop cuts it.
        let m = intervene(&model, &assign(&[("a", 1.0)])).unwrap();
        assert_eq!(m.mean, DVector::from_vec(vec![1.0, 1.0]));
    }

    #[test]
    fn unknown_variables_are_reported() {
        let model = coffee();
        assert_eq!(
            condition(&model, &assign(&[("w", 1.0)])).unwrap_err(),
            Error::UnknownVariable("w".into())
        );
        assert!(intervene(&model, &assign(&[("w", 1.0)])).is_err());
    }

    #[test]
    fn mutilated_model_prior_equals_intervention() {
        let model = coffee();
        let action = assign(&[("p", 7.0)]);
        let via_model = prior_moments(&post_intervention_model(&model, &action).unwrap()).unwrap();
        let direct = intervene(&model, &action).unwrap();
        assert!(via_model.max_abs_diff(&direct) < 1e-12);
    }
}
