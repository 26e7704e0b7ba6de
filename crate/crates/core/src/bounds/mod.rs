//! Analytic starvation bounds and the quantities they depend on.

pub mod diffusion;
pub mod exponent;
pub mod iid;
pub mod poisson;
pub mod special;

pub use diffusion::{diffusion_bound, diffusion_bound_physical};
pub use exponent::{
    exponent_exponential, exponent_root, exponent_subgaussian, link_exponents, ExponentMethod, ExponentResult,
};
pub use iid::{clt_lower_bound, iid_bound_from_exponents, iid_subgaussian_bound, iid_upper_bound};
pub use poisson::{asym_var_fair_sharing, asym_var_onoff, poisson_solve, PoissonSolution};
pub use special::{lambert_w0, psi};

/// How per-link failure terms `x_k` are combined into one bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// `1 - prod(1 - x_k)`; assumes independent links.
    #[default]
    Product,
    /// `min(1, sum x_k)`; holds without independence.
    Union,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Product => "product",
            Variant::Union => "union",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "product" => Some(Variant::Product),
            "union" => Some(Variant::Union),
            _ => None,
        }
    }

    /// Combines per-link terms, each clamped to `[0, 1]`.
    pub fn combine<I: IntoIterator<Item = f64>>(self, terms: I) -> f64 {
        let terms = terms.into_iter().map(|x| x.clamp(0.0, 1.0));
        match self {
            Variant::Product => (1.0 - terms.map(|x| 1.0 - x).product::<f64>()).clamp(0.0, 1.0),
            Variant::Union => terms.sum::<f64>().min(1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combine_forms() {
        assert_eq!(Variant::Product.combine([0.5, 0.5]), 0.75);
        assert_eq!(Variant::Union.combine([0.5, 0.5]), 1.0);
        assert_eq!(Variant::Union.combine([0.1, 0.2]), 0.1 + 0.2);
        assert_eq!(Variant::Product.combine([2.0]), 1.0);
        assert_eq!(Variant::Product.combine(std::iter::empty()), 0.0);
        for x in [0.0, 1e-6, 0.01, 0.3, 0.9] {
            let terms = [x, x / 2.0, x / 3.0];
            assert!(Variant::Product.combine(terms) <= Variant::Union.combine(terms) + 1e-15);
        }
    }
}
