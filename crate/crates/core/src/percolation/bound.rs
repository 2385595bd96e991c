use crate::error::{Result, SimError};

/// Leading term of the worst-case conditional open probability of a blocked
/// vertex, given that its whole neighbourhood is closed:
///
/// `e^{-g tau l_v} (1 - e^{-kappa tau}) e^{-kappa nbhd tau} / (e^{-kappa nbhd tau} + 1 - e^{-g tau r})`.
///
/// `l_v` counts the terms containing the vertex's site, `nbhd` is the size of
/// its deleted neighbourhood and `r` the number of terms touching that
/// neighbourhood.
pub fn conditional_open_lower_bound(
    g: f64,
    kappa: f64,
    tau: f64,
    l_v: usize,
    nbhd: usize,
    r: usize,
) -> Result<f64> {
    if !(kappa > 0.0) || !(tau > 0.0) || !(g >= 0.0) {
        return Err(SimError::Infeasible(format!(
            "bound needs kappa > 0, tau > 0, g >= 0 (got {kappa}, {tau}, {g})"
        )));
    }
    let quiet = (-kappa * nbhd as f64 * tau).exp();
    let busy = -(-g * tau * r as f64).exp_m1();
    // Without coupling the ratio is exactly one; skip the division so the
    // result is the refresh probability to the last bit.
    let ratio = if busy == 0.0 { 1.0 } else { quiet / (quiet + busy) };
    Ok((-g * tau * l_v as f64).exp() * (1.0 - (-kappa * tau).exp()) * ratio)
}

/// The same bound with `tau` fixed by `e^{-kappa tau} = c`.
pub fn conditional_open_lower_bound_at_c(
    g: f64,
    kappa: f64,
    c: f64,
    l_v: usize,
    nbhd: usize,
    r: usize,
) -> Result<f64> {
    if !(c > 0.0 && c < 1.0) || !(kappa > 0.0) {
        return Err(SimError::Infeasible(format!("need c in (0, 1) and kappa > 0 (got {c}, {kappa})")));
    }
    conditional_open_lower_bound(g, kappa, -c.ln() / kappa, l_v, nbhd, r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_coupling_collapses_to_refresh_probability() {
        for (kappa, tau) in [(1.0, 0.3), (20.0, 0.05), (3.0, 2.0)] {
            let b = conditional_open_lower_bound(0.0, kappa, tau, 2, 4, 7).unwrap();
            assert_eq!(b, 1.0 - (-kappa * tau).exp());
        }
        let half = conditional_open_lower_bound(0.0, 1.0, std::f64::consts::LN_2, 1, 1, 1).unwrap();
        assert!((half - 0.5).abs() < 1e-15);
    }

    #[test]
    fn fixed_tau_is_not_monotone_in_kappa() {
        // With g > 0 and a non-empty neighbourhood the quiet factor eventually
        // dominates, so raising kappa at fixed tau lowers the bound.
        let lo = conditional_open_lower_bound(1.0, 20.0, 0.5, 2, 2, 3).unwrap();
        let hi = conditional_open_lower_bound(1.0, 40.0, 0.5, 2, 2, 3).unwrap();
        assert!(hi < lo);
        let lo = conditional_open_lower_bound_at_c(1.0, 20.0, 0.3, 2, 2, 3).unwrap();
        let hi = conditional_open_lower_bound_at_c(1.0, 40.0, 0.3, 2, 2, 3).unwrap();
        assert!(hi > lo);
    }

    #[test]
    fn rejects_degenerate_rates() {
        assert!(conditional_open_lower_bound(1.0, 0.0, 0.1, 1, 1, 1).is_err());
        assert!(conditional_open_lower_bound(1.0, 1.0, 0.0, 1, 1, 1).is_err());
    }
}
