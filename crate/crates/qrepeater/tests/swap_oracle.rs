//! Brute-force checks of the junction-contraction engine against explicit
//! registers: a 64-dimensional density-matrix swap and a pure-state sum over
//! every Bell decomposition and outcome string for chains of up to five pairs.

use nalgebra::DVector;
use qrepeater::distribution::BellDiagonalPair;
use qrepeater::qmat::{embed, partial_trace, project, BellState, Projector, Tensor};
use qrepeater::swapping::{
    self, chain_compose_pairs, conventional_fidelity, dynamical_weights, measurement_basis, SwapMethod, CONVENTIONAL_FRAMES,
    DYNAMICAL_FRAMES, DYNAMICAL_WEIGHT_ORDER,
};
use qrepeater::C64;

const BELL: [BellState; 4] = [BellState::PhiPlus, BellState::PhiMinus, BellState::PsiPlus, BellState::PsiMinus];

fn rank2(f: f64) -> BellDiagonalPair {
    BellDiagonalPair::rank2(BellState::PhiMinus, BellState::PsiMinus, f).unwrap()
}

/// Register 7, 8, 1, 2, 9, 10; measure (8,1) then (2,9), correct the frame on 10.
fn brute_swap(f: f64, method: SwapMethod) -> Vec<[f64; 4]> {
    let pair = rank2(f).to_density();
    let reg = pair.tensor(&pair).unwrap().tensor(&pair).unwrap();
    let basis = measurement_basis(method);
    let frames = match method {
        SwapMethod::Conventional => CONVENTIONAL_FRAMES,
        SwapMethod::Dynamical => DYNAMICAL_FRAMES,
    };
    let dims = vec![2; 6];
    let mut out = Vec::new();
    for (i, bi) in basis.iter().enumerate() {
        for (j, bj) in basis.iter().enumerate() {
            let pi = bi.vector() * bi.vector().adjoint();
            let pj = bj.vector() * bj.vector().adjoint();
            let proj = embed(&pi, &[1, 2], &dims).unwrap() * embed(&pj, &[3, 4], &dims).unwrap();
            let p = Projector::new(proj, dims.clone()).unwrap();
            let ends = partial_trace(&project(&reg, &p, true).unwrap().density().unwrap(), &[0, 5]).unwrap();
            let c = embed(&frames[j][i].correction_to(BellState::PhiMinus), &[1], &[2, 2]).unwrap();
            let fixed = &c * ends.matrix() * c.adjoint();
            out.push(BellDiagonalPair::bell_weights_of(&fixed));
        }
    }
    out
}

#[test]
fn density_register_matches_polynomials_for_every_outcome() {
    for k in 0..=10 {
        let f = 0.5 + 0.05 * k as f64;
        for w in brute_swap(f, SwapMethod::Conventional) {
            assert!((w[BellState::PhiMinus.index()] - conventional_fidelity(f)).abs() < 1e-12);
        }
        let s = dynamical_weights(f);
        for w in brute_swap(f, SwapMethod::Dynamical) {
            for (b, sk) in DYNAMICAL_WEIGHT_ORDER.iter().zip(s) {
                assert!((w[b.index()] - sk).abs() < 1e-12, "f={f} {b:?}: {} vs {sk}", w[b.index()]);
            }
        }
    }
}

#[test]
fn density_register_matches_engine() {
    for f in [0.6, 0.83, 0.97] {
        for method in [SwapMethod::Conventional, SwapMethod::Dynamical] {
            let seg = rank2(f);
            let report = swapping::swap(&seg, &seg, &seg, method).unwrap();
            for (brute, r) in brute_swap(f, method).iter().zip(&report.outcomes) {
                let engine = r.corrected_state.weights();
                for k in 0..4 {
                    assert!((brute[k] - engine[k]).abs() < 1e-12);
                }
            }
            assert_eq!(report.frame_table(), match method {
                SwapMethod::Conventional => CONVENTIONAL_FRAMES,
                SwapMethod::Dynamical => DYNAMICAL_FRAMES,
            });
        }
    }
}

/// Contracts qubits 1 and 2 of `psi` with ⟨m|.
fn contract(psi: &DVector<C64>, m: &DVector<C64>) -> DVector<C64> {
    let q = psi.len().trailing_zeros() as usize;
    let rest = q - 3;
    let mut out = DVector::zeros(1 << (q - 2));
    for head in 0..2usize {
        for tail in 0..(1usize << rest) {
            let mut acc = C64::new(0.0, 0.0);
            for b in 0..4usize {
                acc += m[b].conj() * psi[(head << (q - 1)) | (b << rest) | tail];
            }
            out[(head << rest) | tail] = acc;
        }
    }
    out
}

fn product(labels: &[BellState]) -> DVector<C64> {
    labels.iter().skip(1).fold(labels[0].vector().vector().clone(), |acc, b| acc.kronecker(b.vector().vector()))
}

/// Σ over outcome strings and Bell decompositions of |⟨ideal_s|ψ_{c,s}⟩|².
fn brute_chain(weights: [f64; 4], n: usize, method: SwapMethod) -> f64 {
    let basis: Vec<DVector<C64>> = measurement_basis(method).iter().map(|b| b.vector().clone()).collect();
    let terms: Vec<(f64, DVector<C64>)> = (0..4usize.pow(n as u32))
        .filter_map(|code| {
            let labels: Vec<BellState> = (0..n).map(|k| BELL[(code / 4usize.pow(k as u32)) % 4]).collect();
            let w: f64 = labels.iter().map(|b| weights[b.index()]).product();
            (w > 0.0).then(|| (w, product(&labels)))
        })
        .collect();
    let ideal = product(&vec![BellState::PhiMinus; n]);
    let mut total = 0.0;
    for s in 0..4usize.pow(n as u32 - 1) {
        let path: Vec<&DVector<C64>> = (0..n - 1).map(|k| &basis[(s / 4usize.pow(k as u32)) % 4]).collect();
        let run = |v: &DVector<C64>| path.iter().fold(v.clone(), |acc, m| contract(&acc, m));
        let id = run(&ideal);
        let id = &id / C64::new(id.norm(), 0.0);
        for (w, v) in &terms {
            total += w * id.dotc(&run(v)).norm_sqr();
        }
    }
    total
}

#[test]
fn chains_up_to_five_pairs_match_brute_force() {
    let mixed = [0.05, 0.8, 0.1, 0.05];
    let inputs = [rank2(0.9).weights(), rank2(0.75).weights(), mixed];
    for method in [SwapMethod::Conventional, SwapMethod::Dynamical] {
        for w in inputs {
            let seg = BellDiagonalPair::new(w).unwrap();
            for n in [3u32, 5] {
                let engine = chain_compose_pairs(&seg, n, method).unwrap().f_final;
                let brute = brute_chain(w, n as usize, method);
                assert!((engine - brute).abs() < 1e-10, "{method:?} n={n} w={w:?}: engine {engine} brute {brute}");
            }
        }
    }
}

#[test]
fn ideal_chain_is_perfect() {
    for method in [SwapMethod::Conventional, SwapMethod::Dynamical] {
        let r = chain_compose_pairs(&rank2(1.0), 7, method).unwrap();
        assert!((r.f_final - 1.0).abs() < 1e-12);
    }
}

#[test]
fn probabilities_sum_to_one() {
    let seg = rank2(0.8);
    for method in [SwapMethod::Conventional, SwapMethod::Dynamical] {
        let total: f64 = swapping::swap(&seg, &seg, &seg, method).unwrap().outcomes.iter().map(|o| o.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
