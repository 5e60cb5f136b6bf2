//! Instance suites and independent oracles shared by the integration tests.
#![allow(dead_code)]

use num_traits::Zero;
use stopwise::generators::{
    benchmark_gap_instance, exp_trap_instance, harmonic_instance, random_supermartingale, ski_rental_instance,
    ski_rental_mixture,
};
use stopwise::mssc::{random_instance, MsscInstance, RandomInstanceSpec};
use stopwise::rational::{int, ratio, Rational};
use stopwise::tree_model::InstanceTree;

/// Random super-martingales of depth `0..=6` and branching `1..=3`.
pub fn fuzzed_trees(count: u64, first_seed: u64) -> Vec<(String, InstanceTree)> {
    (0..count)
        .map(|i| {
            let depth = (i % 7) as usize;
            let branching = 1 + (i / 7 % 3) as usize;
            let seed = first_seed + i;
            let tree = random_supermartingale(depth, branching, 16, seed).expect("valid parameters");
            (format!("random-d{depth}-k{branching}-seed{seed}"), tree)
        })
        .collect()
}

/// Every named family at the sizes used in the worked examples.
pub fn named_instances() -> Vec<(String, InstanceTree)> {
    let mut out = Vec::new();
    for n in 1..=10 {
        out.push((format!("harmonic-n{n}"), harmonic_instance(n).unwrap()));
    }
    for n in 1..=8 {
        out.push((format!("exp-trap-n{n}"), exp_trap_instance(n).unwrap()));
    }
    for n in [2u32, 4, 8] {
        out.push((format!("benchmark-gap-n{n}"), benchmark_gap_instance(n, n as usize).unwrap()));
        out.push((format!("benchmark-gap-n{n}-h{}", 2 * n), benchmark_gap_instance(n, 2 * n as usize).unwrap()));
    }
    for b in [1i64, 5, 10] {
        for t in [1usize, 3, 8, 15] {
            out.push((format!("ski-rental-b{b}-t{t}"), ski_rental_instance(&int(b), t, 15).unwrap()));
        }
    }
    let dist = [(1, ratio(1, 4)), (4, ratio(1, 4)), (9, ratio(1, 2))];
    out.push(("ski-mixture".into(), ski_rental_mixture(&int(6), &dist, 12).unwrap()));
    out
}

/// `∫_r^s v_p(Q^{-1}(w)) dw` from the breakpoints `Q(j) = Σ_{i<j} 1/v_i`:
/// segment `j` contributes `v_j · |[r, s] ∩ [Q(j), Q(j+1)]|`.
pub fn lemma1_rhs(values: &[Rational], r: &Rational, s: &Rational) -> Rational {
    let mut total = Rational::zero();
    let mut lo = Rational::zero();
    for v in values {
        let hi = &lo + v.recip();
        let a = if r > &lo { r.clone() } else { lo.clone() };
        let b = if s < &hi { s.clone() } else { hi.clone() };
        if a < b {
            total += v * (b - a);
        }
        lo = hi;
    }
    total
}

/// Small random set cover instances: up to 5 boxes, 8 scenarios, depth 3.
pub fn small_mssc(index: u64, max_cost: u64) -> MsscInstance {
    let spec = RandomInstanceSpec {
        n_boxes: 1 + (index % 5) as usize,
        n_scenarios: 1 + (index / 5 % 8) as usize,
        depth: (index / 40 % 4) as usize,
        max_cost,
        seed: 1_000 + index,
    };
    random_instance(spec).expect("valid parameters")
}
