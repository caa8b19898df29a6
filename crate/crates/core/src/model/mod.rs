//! The order-one tensor autoregression
//! `Y_t = A_t + ⟨B, Y_{t−1}⟩ + E_t`, `vec(E_t) ~ N(0, ω_t Σ3 ⊗ Σ2 ⊗ Σ1)`.

pub mod likelihood;
pub mod prior;
pub mod residuals;
pub mod simulate;
pub mod stacked;
pub mod state;

pub use likelihood::{log_likelihood, quad_form};
pub use prior::{draw_prior_state, log_prior, stick_breaking, Priors};
pub use residuals::{residuals, spectral_radius, var_form};
pub use simulate::simulate;
pub use state::{
    CoeffForm, ErrorCov, InterceptTrend, ModeShrinkage, ModelSpec, ModelState, Regime,
    ShrinkageState, VolLatent, VolatilityState,
};
