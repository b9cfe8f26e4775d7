//! Independent-oracle checks: every computational path with a brute-force
//! or generic counterpart is pinned against it here.

mod common;

use std::collections::BTreeMap;

use common::{naive_permanent, random_complex_matrix, solve_least_squares};
use lossmit_core::baselines::{postselect_estimates, richardson_mitigate, ZneBasis, ZneConfig};
use lossmit_core::comb::{binomial_f64, uniform_probability};
use lossmit_core::distribution::{
    ideal_distribution, ideal_distribution_raw, CollisionPolicy, InputConfig, ProbabilityTable,
};
use lossmit_core::interferometer::haar_unitary;
use lossmit_core::loss::{draw_samples, lossy_conditional_distribution, LossModel};
use lossmit_core::mask::{all_masks, OccupationMask};
use lossmit_core::mitigation::fit_global_gradient;
use lossmit_core::permanent::permanent;
use lossmit_core::recycling::dependency_factor;
use lossmit_core::rng;

fn exact_table(m: u32, n: u32, seed: u64) -> ProbabilityTable {
    let u = haar_unitary(m, seed).unwrap();
    let cfg = InputConfig::first_modes(m, n).unwrap();
    ideal_distribution(&u, &cfg, CollisionPolicy::DiscardRenormalize).unwrap()
}

#[test]
fn ryser_matches_permutation_sum_on_random_matrices() {
    let mut gen = rng::stream(41);
    for n in 2..=7usize {
        for _ in 0..20 {
            let a = random_complex_matrix(n, &mut gen);
            let fast = permanent(a.view()).unwrap();
            let slow = naive_permanent(&a);
            let rel = (fast - slow).norm() / slow.norm().max(1e-30);
            assert!(rel < 1e-10, "n={n}: {fast} vs {slow}");
        }
    }
}

#[test]
fn ideal_distribution_matches_naive_minors() {
    // Every entry at m=8, n=3 equals the naive |Per|^2 of the minor, after
    // renormalisation by the raw sector mass.
    let m = 8u32;
    let n = 3u32;
    let u = haar_unitary(m, 4242).unwrap();
    let cfg = InputConfig::first_modes(m, n).unwrap();
    let table = ideal_distribution(&u, &cfg, CollisionPolicy::DiscardRenormalize).unwrap();

    let mut raw = BTreeMap::new();
    let mut mass = 0.0;
    for mask in all_masks(m, n).unwrap() {
        let cols = mask.occupied_modes();
        let minor = ndarray::Array2::from_shape_fn((3, 3), |(i, j)| {
            u.entries()[(i, cols[j] as usize)]
        });
        let p = naive_permanent(&minor).norm_sqr();
        mass += p;
        raw.insert(mask, p);
    }
    assert!((table.raw_mass().unwrap() - mass).abs() < 1e-12);
    for (mask, p) in raw {
        assert!(
            (table.get(&mask) - p / mass).abs() < 1e-12,
            "mismatch at {mask:?}"
        );
    }
}

#[test]
fn lossy_conditional_matches_loss_event_enumeration() {
    // Marginalise over every (ideal outcome, lost-subset) pair directly.
    let m = 8u32;
    let n = 3u32;
    let ideal = exact_table(m, n, 77);
    for k in 1..=2u32 {
        let weight = 1.0 / binomial_f64(n as u64, k as u64);
        let mut brute: BTreeMap<OccupationMask, f64> = BTreeMap::new();
        for (outcome, &p) in ideal.entries() {
            for survivor in outcome.loss_descendants(k).unwrap() {
                *brute.entry(survivor).or_insert(0.0) += p * weight;
            }
        }
        let lossy = lossy_conditional_distribution(&ideal, k).unwrap();
        assert_eq!(lossy.entries().len(), brute.len());
        for (mask, &p) in lossy.entries() {
            assert!((p - brute[mask]).abs() < 1e-13, "k={k}, {mask:?}");
        }
    }
}

#[test]
fn estimates_converge_to_exact_conditionals() {
    // N_tot = 1e7 at m=8, n=3, eta=0.6: sector frequencies approach the
    // exact conditional distributions.
    let ideal = exact_table(8, 3, 5);
    let ledger = draw_samples(&ideal, &LossModel::new(0.6).unwrap(), 10_000_000, 3).unwrap();
    for k in 0..=2u32 {
        let exact = lossy_conditional_distribution(&ideal, k).unwrap();
        let mut worst = 0.0f64;
        for mask in all_masks(8, 3 - k).unwrap() {
            let est = ledger.estimate_probability(&mask, k, false).unwrap();
            worst = worst.max((est - exact.get(&mask)).abs());
        }
        assert!(worst < 5e-3, "k={k}: max abs error {worst}");
    }
}

#[test]
fn postselection_converges_within_hoeffding_envelope() {
    // m=20, n=4, eta=0.8, N_tot=1e7: the realised lossless-sector count and
    // a union bound over the C(20,4) outcomes give the envelope.
    let ideal = exact_table(20, 4, 9);
    let ledger = draw_samples(&ideal, &LossModel::new(0.8).unwrap(), 10_000_000, 11).unwrap();
    let table = postselect_estimates(&ledger).unwrap();
    let kept = ledger.sector_total(0) as f64;
    let outcomes = binomial_f64(20, 4);
    let delta = 1e-3;
    let envelope = ((2.0 * outcomes / delta).ln() / (2.0 * kept)).sqrt();
    let mut worst = 0.0f64;
    for mask in all_masks(20, 4).unwrap() {
        worst = worst.max((table.get(&mask) - ideal.get(&mask)).abs());
    }
    assert!(worst < envelope, "max error {worst} vs envelope {envelope}");
}

#[test]
fn gradient_and_prefactor_fits_match_generic_least_squares() {
    // Slope of f(x) = -g x + d0: generic solver on design (-x), target
    // (d_i - d0).
    let d0 = 0.31;
    let data = [(1u32, 0.22), (2, 0.19), (3, 0.13), (4, 0.115), (5, 0.08)];
    let crate_fit = fit_global_gradient(&data, d0).unwrap();
    let design: Vec<Vec<f64>> = data.iter().map(|&(x, _)| vec![-f64::from(x)]).collect();
    let target: Vec<f64> = data.iter().map(|&(_, d)| d - d0).collect();
    let generic = solve_least_squares(&design, &target)[0];
    assert!((crate_fit - generic).abs() < 1e-12);

    // Exponential prefactor: model y = lambda w_i with w_i = exp(-alpha x);
    // the closed form sum(y w)/sum(w^2) must agree with the generic solver.
    let alpha = 0.9f64;
    let ys = [0.021, 0.008, 0.0045];
    let design: Vec<Vec<f64>> = (1..=3)
        .map(|k| vec![(-alpha * f64::from(k)).exp()])
        .collect();
    let generic = solve_least_squares(&design, &ys)[0];
    let closed = {
        let num: f64 = ys
            .iter()
            .zip(&design)
            .map(|(y, row)| y * row[0])
            .sum();
        let den: f64 = design.iter().map(|row| row[0] * row[0]).sum();
        num / den
    };
    assert!((closed - generic).abs() < 1e-12);
}

#[test]
fn richardson_recovers_simulator_marginal() {
    // Exact lossy marginals of "one photon in mode 0" at m=8, n=3 are a
    // polynomial combination over the loss grid; extrapolation recovers the
    // ideal marginal to 1e-8.
    let m = 8u32;
    let n = 3u32;
    let c = 1u32;
    let ideal = exact_table(m, n, 21);

    let marginal_given_loss = |lost: u32| -> f64 {
        let cond = lossy_conditional_distribution(&ideal, lost).unwrap();
        cond.entries()
            .iter()
            .filter(|(mask, _)| mask.is_occupied(0))
            .map(|(_, p)| p)
            .sum()
    };
    let per_sector: Vec<f64> = (0..=(n - c)).map(marginal_given_loss).collect();

    let cfg =
        ZneConfig::equally_spaced(n, c, 0.15, 0.75, 0.01, ZneBasis::LossBasis).unwrap();
    let noisy: Vec<f64> = cfg
        .etas()
        .iter()
        .map(|&eta| {
            per_sector
                .iter()
                .enumerate()
                .map(|(i, marg)| {
                    binomial_f64(n as u64, i as u64)
                        * eta.powi(i as i32)
                        * (1.0 - eta).powi((n - i as u32) as i32)
                        * marg
                })
                .sum()
        })
        .collect();
    let recovered = richardson_mitigate(&noisy, &cfg).unwrap();
    assert!(
        (recovered - per_sector[0]).abs() < 1e-8,
        "{recovered} vs {}",
        per_sector[0]
    );
}

#[test]
fn dependency_factor_in_range_at_desk_scale() {
    // Exact m=20, n=4, k=1 simulation: the literal-formula dependency lands
    // inside [0, 1].
    let ideal = exact_table(20, 4, 3);
    let d0 = lossmit_core::recycling::abs_avg_deviation_table(&ideal);
    let recycled = lossmit_core::recycling::recycled_table_exact(&ideal, 1).unwrap();
    let est = dependency_factor(recycled.abs_avg_deviation(), d0, 20, 4, 1).unwrap();
    assert!(
        !est.out_of_range,
        "dependency {} outside [0, 1]",
        est.value
    );
}

#[test]
fn haar_minor_moment_sits_at_finite_m_value() {
    // For exact Haar unitaries the mean raw interference equals the
    // finite-m minor moment n!(m-1)!/(m+n-1)! — below the Gaussian-model
    // value n!/m^n by m^n / (m(m+1)...(m+n-1)), a 16% deficit at m=16, n=3.
    // This pins why the Gaussian-minor surrogate is the right model for the
    // n!/m^n comparison.
    let m = 16u32;
    let n = 3u32;
    let input = InputConfig::first_modes(m, n).unwrap();
    let p_unif = uniform_probability(m, n);
    let draws = 150u64;
    let mut acc = 0.0;
    for i in 0..draws {
        let u = haar_unitary(m, rng::derive_seed(909, i)).unwrap();
        let raw = ideal_distribution_raw(&u, &input).unwrap();
        // Mean interference over targets equals p_unif times the raw mass.
        acc += p_unif * raw.mass();
    }
    let estimate = acc / draws as f64;
    let finite_m = 6.0 / (16.0 * 17.0 * 18.0);
    let gaussian = 6.0 / 16f64.powi(3);
    assert!(
        (estimate - finite_m).abs() / finite_m < 0.03,
        "haar mean {estimate:.4e} vs finite-m {finite_m:.4e}"
    );
    assert!((estimate - gaussian).abs() / gaussian > 0.10);
}

#[test]
fn raw_tables_expose_unrenormalised_sector() {
    let m = 10u32;
    let n = 3u32;
    let u = haar_unitary(m, 15).unwrap();
    let cfg = InputConfig::first_modes(m, n).unwrap();
    let raw = ideal_distribution_raw(&u, &cfg).unwrap();
    let renorm = ideal_distribution(&u, &cfg, CollisionPolicy::DiscardRenormalize).unwrap();
    let back = renorm.to_raw().unwrap();
    assert!(raw.mass() < 1.0);
    for (mask, &p) in raw.entries() {
        assert!((back.get(mask) - p).abs() < 1e-14);
    }
    let p_unif = uniform_probability(m, n);
    assert!((renorm.mass() - 1.0).abs() < 1e-9);
    assert!(p_unif > 0.0);
}
