//! Gate-level elements: wave plates, Pauli corrections, cross-Kerr phases on
//! the probe, the probe phase shifter and the ideal m-control Toffoli.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{HybridState, Polarization, ProbeBranch, Register};

const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Correction {
    BitFlip { qubit: usize },
    PhaseZ { qubit: usize },
    Phase { qubit: usize, phi: f64 },
}

impl Correction {
    pub fn qubit(&self) -> usize {
        match *self {
            Correction::BitFlip { qubit } | Correction::PhaseZ { qubit } | Correction::Phase { qubit, .. } => qubit,
        }
    }

    pub fn apply<R: Register>(&self, state: &R) -> Result<R> {
        match *self {
            Correction::BitFlip { qubit } => pauli_x(state, qubit),
            Correction::PhaseZ { qubit } => pauli_z(state, qubit),
            Correction::Phase { qubit, phi } => phase_gate(state, qubit, phi),
        }
    }
}

fn check_index<R: Register>(state: &R, qubit: usize) -> Result<()> {
    if qubit >= state.n_qubits() {
        return Err(Error::invalid(format!("qubit {qubit} out of range for {} qubits", state.n_qubits())));
    }
    Ok(())
}

/// Half-wave plate at 22.5°: `|H⟩ ↦ (|H⟩+|V⟩)/√2`, `|V⟩ ↦ (|H⟩−|V⟩)/√2`.
pub fn hadamard<R: Register>(state: &R, qubit: usize) -> Result<R> {
    check_index(state, qubit)?;
    let bit = 1u64 << qubit;
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    state.remap(|p, emit| {
        let sign = if p & bit == 0 { h } else { -h };
        emit(p & !bit, h);
        emit(p | bit, sign);
    })
}

pub fn pauli_x<R: Register>(state: &R, qubit: usize) -> Result<R> {
    check_index(state, qubit)?;
    let bit = 1u64 << qubit;
    state.remap(|p, emit| emit(p ^ bit, ONE))
}

pub fn pauli_z<R: Register>(state: &R, qubit: usize) -> Result<R> {
    check_index(state, qubit)?;
    let bit = 1u64 << qubit;
    state.remap(|p, emit| emit(p, if p & bit == 0 { ONE } else { -ONE }))
}

/// Gives `|V⟩` on `qubit` the factor `e^{iφ}`.
pub fn phase_gate<R: Register>(state: &R, qubit: usize, phi: f64) -> Result<R> {
    check_index(state, qubit)?;
    let bit = 1u64 << qubit;
    let factor = Complex64::from_polar(1.0, phi);
    state.remap(|p, emit| emit(p, if p & bit == 0 { ONE } else { factor }))
}

/// Cross-Kerr cell: terms whose `qubit` is in the `trigger` polarization get
/// their probe branch rotated by `e^{iθ_eff}`.
pub fn kerr(state: &HybridState, qubit: usize, theta_eff: f64, trigger: Polarization) -> Result<HybridState> {
    state.require_probe()?;
    check_index(state, qubit)?;
    let rotation = Complex64::from_polar(1.0, theta_eff);
    let want = trigger.bit();
    state.map_branches(|p, b| if (p >> qubit) & 1 == want { ProbeBranch(b.0 * rotation) } else { b })
}

/// Phase shifter on the probe: every branch gets `e^{iφ}`.
pub fn probe_shift(state: &HybridState, phi: f64) -> Result<HybridState> {
    state.require_probe()?;
    let rotation = Complex64::from_polar(1.0, phi);
    state.map_branches(|_, b| ProbeBranch(b.0 * rotation))
}

/// Ideal m-control Toffoli: flips `target` on every term whose controls are
/// all `V`.
pub fn toffoli_m<R: Register>(state: &R, controls: &[usize], target: usize) -> Result<R> {
    check_index(state, target)?;
    let mut mask = 0u64;
    for &c in controls {
        check_index(state, c)?;
        if c == target || mask >> c & 1 == 1 {
            return Err(Error::invalid(format!("control {c} repeats or overlaps the target")));
        }
        mask |= 1 << c;
    }
    let bit = 1u64 << target;
    state.remap(|p, emit| emit(if p & mask == mask { p ^ bit } else { p }, ONE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{fidelity, make_ghz, make_plus_product, HybridTerm, Pattern, QubitState, Sign};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn hv(s: &str) -> QubitState {
        QubitState::basis(Pattern::from_hv(s).unwrap())
    }

    fn assert_same(a: &QubitState, b: &QubitState) {
        assert_eq!(a.n_qubits(), b.n_qubits());
        let overlap = a.inner(b).unwrap();
        assert!((overlap - 1.0).norm() < 1e-12, "overlap {overlap}");
    }

    #[test]
    fn hadamard_on_h() {
        let out = hadamard(&hv("H"), 0).unwrap();
        assert_same(&out, &make_plus_product(1, Sign::Plus).unwrap());
        let out = hadamard(&hv("V"), 0).unwrap();
        assert_same(&out, &make_plus_product(1, Sign::Minus).unwrap());
        assert!(matches!(hadamard(&hv("H"), 1), Err(Error::InvalidArgument(_))));
    }

    /// Dense 2^n amplitude vector, built independently of the sparse maps.
    fn dense(state: &QubitState) -> Vec<Complex64> {
        let mut v = vec![Complex64::new(0.0, 0.0); 1 << state.n_qubits()];
        for (p, a) in state.iter() {
            v[p.bits() as usize] = a;
        }
        v
    }

    #[test]
    fn hadamard_all_on_ghz4_matches_dense_expansion() {
        // ½[(|H⟩+|V⟩)^⊗4 + (|H⟩−|V⟩)^⊗4]/√2 has support on the 8 even-weight patterns.
        let mut s = make_ghz(4, Sign::Plus).unwrap();
        for q in 0..4 {
            s = hadamard(&s, q).unwrap();
        }
        assert_eq!(s.len(), 8);
        let got = dense(&s);
        for (bits, amp) in got.iter().enumerate() {
            let plus = 0.25;
            let minus = 0.25 * if (bits as u32).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
            let want = (plus + minus) * FRAC_1_SQRT_2;
            assert_abs_diff_eq!(amp.re, want, epsilon = 1e-14);
            assert_abs_diff_eq!(amp.im, 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn pauli_examples() {
        assert_same(&pauli_x(&hv("HV"), 0).unwrap(), &hv("VV"));
        let flipped = pauli_z(&make_ghz(2, Sign::Plus).unwrap(), 1).unwrap();
        assert_same(&flipped, &make_ghz(2, Sign::Minus).unwrap());
        assert!(pauli_x(&hv("HV"), 2).is_err());
    }

    #[test]
    fn kerr_examples() {
        let alpha = Complex64::new(2.0, 0.0);
        let theta = 0.3;
        let plus = make_plus_product(1, Sign::Plus).unwrap();
        let out = kerr(&HybridState::with_probe(&plus, alpha), 0, theta, Polarization::V).unwrap();
        let r = FRAC_1_SQRT_2;
        let expect = HybridState::from_terms(
            1,
            true,
            [
                HybridTerm { pattern: 0, branch: ProbeBranch(alpha), amplitude: Complex64::new(r, 0.0) },
                HybridTerm {
                    pattern: 1,
                    branch: ProbeBranch(alpha * Complex64::from_polar(1.0, theta)),
                    amplitude: Complex64::new(r, 0.0),
                },
            ],
        )
        .unwrap();
        assert_abs_diff_eq!(out.inner(&expect).unwrap().re, 1.0, epsilon = 1e-14);

        let hyb = HybridState::with_probe(&plus, alpha);
        assert_eq!(kerr(&hyb, 0, 0.0, Polarization::V).unwrap(), hyb);

        let vv = HybridState::with_probe(&hv("VV"), alpha);
        let out = kerr(&kerr(&vv, 0, theta, Polarization::V).unwrap(), 1, theta, Polarization::V).unwrap();
        let want = alpha * Complex64::from_polar(1.0, 2.0 * theta);
        assert!((out.terms()[0].branch.0 - want).norm() < 1e-12);

        let bare = HybridState::without_probe(&plus);
        assert!(matches!(kerr(&bare, 0, theta, Polarization::V), Err(Error::State(_))));
        assert!(matches!(probe_shift(&bare, theta), Err(Error::State(_))));
    }

    #[test]
    fn probe_shift_examples() {
        let alpha = Complex64::new(5.0, 0.0);
        let s = HybridState::with_probe(&make_plus_product(2, Sign::Plus).unwrap(), alpha);
        let out = probe_shift(&s, -0.1).unwrap();
        for t in out.terms() {
            assert!((t.branch.0 - alpha * Complex64::from_polar(1.0, -0.1)).norm() < 1e-12);
        }
        assert_eq!(probe_shift(&s, 0.0).unwrap(), s);
        let two = probe_shift(&probe_shift(&s, 0.2).unwrap(), 0.5).unwrap();
        let one = probe_shift(&s, 0.7).unwrap();
        assert_abs_diff_eq!(two.inner(&one).unwrap().re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn toffoli_examples() {
        assert_same(&toffoli_m(&hv("VVH"), &[0, 1], 2).unwrap(), &hv("VVV"));
        assert_same(&toffoli_m(&hv("HVH"), &[0, 1], 2).unwrap(), &hv("HVH"));
        let ghz_t = make_ghz(2, Sign::Plus).unwrap().tensor(&hv("H")).unwrap();
        assert_same(&toffoli_m(&ghz_t, &[0, 1], 2).unwrap(), &make_ghz(3, Sign::Plus).unwrap());
        assert!(toffoli_m(&ghz_t, &[0, 2], 2).is_err());
        assert!(toffoli_m(&ghz_t, &[0, 0], 2).is_err());
    }

    #[test]
    fn phase_pi_is_pauli_z() {
        let s = make_plus_product(3, Sign::Plus).unwrap();
        let s = phase_gate(&s, 1, 0.4).unwrap();
        let a = phase_gate(&s, 2, std::f64::consts::PI).unwrap();
        let b = pauli_z(&s, 2).unwrap();
        assert_abs_diff_eq!(fidelity(&a, &b).unwrap(), 1.0, epsilon = 1e-14);
        assert!((a.inner(&b).unwrap() - 1.0).norm() < 1e-14);
    }

    fn arb_state(n: usize) -> impl Strategy<Value = QubitState> {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1 << n).prop_filter_map("degenerate", move |amps| {
            QubitState::from_terms(
                n,
                amps.into_iter().enumerate().map(|(i, (re, im))| (i as u64, Complex64::new(re, im))),
            )
            .ok()
        })
    }

    fn arb_hybrid(n: usize) -> impl Strategy<Value = HybridState> {
        (arb_state(n), 0.5f64..4.0).prop_map(|(s, a)| HybridState::with_probe(&s, Complex64::new(a, 0.0)))
    }

    proptest! {
        #[test]
        fn gates_preserve_inner_products(a in arb_state(3), b in arb_state(3), q in 0usize..3, phi in -3.0f64..3.0) {
            let before = a.inner(&b).unwrap();
            let ops: [&dyn Fn(&QubitState) -> QubitState; 5] = [
                &|s| hadamard(s, q).unwrap(),
                &|s| pauli_x(s, q).unwrap(),
                &|s| pauli_z(s, q).unwrap(),
                &|s| phase_gate(s, q, phi).unwrap(),
                &|s| toffoli_m(s, &[(q + 1) % 3, (q + 2) % 3], q).unwrap(),
            ];
            for op in ops {
                let after = op(&a).inner(&op(&b)).unwrap();
                prop_assert!((after - before).norm() < 1e-10);
            }
        }

        #[test]
        fn hadamard_and_toffoli_are_involutions(s in arb_state(3), q in 0usize..3) {
            let hh = hadamard(&hadamard(&s, q).unwrap(), q).unwrap();
            prop_assert!((hh.inner(&s).unwrap() - 1.0).norm() < 1e-10);
            let controls = [(q + 1) % 3, (q + 2) % 3];
            let tt = toffoli_m(&toffoli_m(&s, &controls, q).unwrap(), &controls, q).unwrap();
            prop_assert!((tt.inner(&s).unwrap() - 1.0).norm() < 1e-10);
        }

        #[test]
        fn kerr_preserves_inner_products(a in arb_hybrid(2), b in arb_hybrid(2), theta in -1.0f64..1.0) {
            let before = a.inner(&b).unwrap();
            let ka = kerr(&a, 1, theta, Polarization::V).unwrap();
            let kb = kerr(&b, 1, theta, Polarization::V).unwrap();
            prop_assert!((ka.inner(&kb).unwrap() - before).norm() < 1e-10);
        }

        #[test]
        fn kerr_cells_on_distinct_qubits_commute(s in arb_hybrid(3), t1 in -1.0f64..1.0, t2 in -1.0f64..1.0) {
            let ab = kerr(&kerr(&s, 0, t1, Polarization::V).unwrap(), 2, t2, Polarization::H).unwrap();
            let ba = kerr(&kerr(&s, 2, t2, Polarization::H).unwrap(), 0, t1, Polarization::V).unwrap();
            prop_assert_eq!(ab.len(), ba.len());
            for (x, y) in ab.terms().iter().zip(ba.terms()) {
                prop_assert_eq!(x.pattern, y.pattern);
                prop_assert!(x.branch.same_branch(&y.branch));
                prop_assert!((x.amplitude - y.amplitude).norm() < 1e-12);
            }
        }
    }
}
