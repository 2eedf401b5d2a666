//! Cross-module invariants and the worked examples of each operation.

use std::sync::Arc;

use selfsim_core::builtins;
use selfsim_core::ergodic::{fit_exponent, integral_mu, CylindricalFunction, DeviationModel, Profile};
use selfsim_core::experiment::{default_function, deviation_series, naive_ergodic_integral, window_for, DEFAULT_SEED};
use selfsim_core::measures::{phi_plus_ball, PhiVector};
use selfsim_core::spectral::{correlation, spectral_form, KernelSpec};
use selfsim_core::spectrum::{spectral_data, tile_frequencies};
use selfsim_core::stats::fit_log_log;
use selfsim_core::subst::build_incidence;
use selfsim_core::tiling::{ball_decomposition, expand, make_window, AnchorMode, BoxDomain, CellBox, Patch};

#[test]
fn phi_ball_equals_cell_sum() {
    let sub = Arc::new(builtins::sym95());
    let s = build_incidence(&sub);
    let w = make_window(Arc::clone(&sub), 0, 7, AnchorMode::Center).unwrap().with_origin([1093.4, 1101.9]);
    let r = 243.0;
    let v = PhiVector::integral("u2", &[1, -1]);
    let hier = phi_plus_ball(&s, &v, &w, r).unwrap();
    let f = CylindricalFunction::constants(&sub, "v", &[1.0, -1.0]).unwrap();
    let naive = naive_ergodic_integral(&f, &w, r).unwrap();
    assert!((hier - naive).abs() <= 1e-6 * naive.abs().max(1.0), "{hier} vs {naive}");
}

#[test]
fn ergodic_integral_fixed_anchor() {
    let sub = Arc::new(builtins::sym95());
    let sd = spectral_data(&sub).unwrap();
    let f = CylindricalFunction::constants(&sub, "psi", &[1.0, -1.0]).unwrap();
    let w = make_window(Arc::clone(&sub), 1, 6, AnchorMode::Center).unwrap().with_origin([301.7, 422.2]);
    let model = DeviationModel::new(&f, &sub, &sd, 6).unwrap();
    let fast = model.ball(&w, 64.3).unwrap().integral;
    let slow = naive_ergodic_integral(&f, &w, 64.3).unwrap();
    assert!((fast - slow).abs() <= 1e-8);
}

#[test]
fn grid_profiles_match_enumeration() {
    let sub = Arc::new(builtins::table());
    let sd = spectral_data(&sub).unwrap();
    let f = CylindricalFunction::new(
        &sub,
        "grid",
        vec![
            Profile::Grid { g: 2, values: vec![1.0, -2.0, 0.5, 3.0] },
            Profile::Grid { g: 3, values: vec![0.0, 1.0, -1.0, 2.0, 2.0, -4.0, 1.0, 0.0, 0.25] },
        ],
    )
    .unwrap();
    let w = window_for(&sub, 70.0).unwrap();
    let model = DeviationModel::new(&f, &sub, &sd, w.hierarchy().levels()).unwrap();
    for (i, a) in w.sample_anchors(10, 66.0, 4).unwrap().into_iter().enumerate() {
        let w = w.with_origin(a);
        let rho = 6.0 * i as f64 + 0.7;
        let fast = model.ball(&w, rho).unwrap().integral;
        let slow = naive_ergodic_integral(&f, &w, rho).unwrap();
        assert!((fast - slow).abs() <= 1e-8, "{fast} {slow}");
    }
}

#[test]
fn constant_function_residual_vanishes_on_unions() {
    for sub in [builtins::sym95(), builtins::ab42()] {
        let sub = Arc::new(sub);
        let sd = spectral_data(&sub).unwrap();
        let f = CylindricalFunction::constant(&sub, -2.0);
        let w = make_window(Arc::clone(&sub), 0, 6, AnchorMode::Center).unwrap();
        let h = w.hierarchy();
        let model = DeviationModel::new(&f, &sub, &sd, 6).unwrap();
        // Two adjacent level-2 supertiles and one level-3 supertile.
        let s2 = h.scale(2);
        let s3 = h.scale(3);
        for bounds in [
            CellBox::from_lattice([0, 0], [2 * s2[0], s2[1]]),
            CellBox::from_lattice([s3[0], 0], [s3[0], s3[1]]),
        ] {
            let e = model.domain(h, &BoxDomain { bounds, dim: sub.dim() });
            assert!(e.residual.abs() <= 1e-9, "{e:?}");
        }
    }
}

#[test]
fn frequency_convergence_rate() {
    for sub in builtins::all() {
        let sd = spectral_data(&sub).unwrap();
        let freqs = tile_frequencies(&sd, &sub);
        let vols = sub.volumes();
        let ratio = sd.eigenvalues.get(1).map_or(0.0, |e| e.0.abs()) / sd.theta1;
        for root in 0..sub.num_types() {
            for n in 1..=6 {
                let patch = expand(&sub, &Patch::single(root), n).unwrap();
                let counts = patch.counts(sub.num_types());
                let area: f64 = counts.iter().zip(&vols).map(|(c, v)| *c as f64 * v).sum();
                for i in 0..sub.num_types() {
                    let empirical = counts[i] as f64 * vols[i] / area;
                    let limit = freqs[i] * vols[i];
                    assert!((empirical - limit).abs() <= 2.0 * ratio.powi(n as i32) + 1e-12, "{} n={n}", sub.name());
                }
            }
        }
    }
}

#[test]
fn boundary_count_is_perimeter_like() {
    let sub = Arc::new(builtins::sym95());
    let w = make_window(Arc::clone(&sub), 0, 7, AnchorMode::Center).unwrap();
    let mut pts = Vec::new();
    for k in 1..=6 {
        let r = 3f64.powi(k);
        let d = ball_decomposition(&w, r).unwrap();
        pts.push((r, d.boundary_cells.len() as f64));
        let c = d.boundary_cells.len() as f64 / r;
        // A circle of radius R meets at most 8R + 4 unit cells.
        assert!(c <= 8.0 + 4.0 / r, "C = {c}");
    }
    let fit = fit_log_log(&pts, 2).unwrap();
    assert!((fit.slope - 1.0).abs() < 0.1, "boundary growth {}", fit.slope);
}

#[test]
fn mean_convergence_rate() {
    let sub = Arc::new(builtins::sym95());
    let sd = spectral_data(&sub).unwrap();
    let f = default_function(&sub, &sd);
    assert_eq!(integral_mu(&f, &tile_frequencies(&sd, &sub)), 0.0);
    let w = window_for(&sub, 243.0).unwrap();
    let anchors = w.sample_anchors(64, 244.0, DEFAULT_SEED).unwrap();
    let model = DeviationModel::new(&f, &sub, &sd, w.hierarchy().levels()).unwrap();
    let (s, _) = deviation_series(&sub, &model, &w, &[0, 1, 2, 3, 4, 5], &anchors, DEFAULT_SEED).unwrap();
    let pts: Vec<(f64, f64)> = s.rows.iter().map(|r| (r.r, r.rms / (std::f64::consts::PI * r.r * r.r))).collect();
    let slope = fit_log_log(&pts, 2).unwrap().slope;
    assert!(slope <= sd.alpha.unwrap() - 2.0 + 0.1, "{slope}");
}

#[test]
fn exponent_fits_agree_across_anchor_sets() {
    let sub = Arc::new(builtins::ab42());
    let sd = spectral_data(&sub).unwrap();
    let f = default_function(&sub, &sd);
    let w = window_for(&sub, 65536.0).unwrap();
    let model = DeviationModel::new(&f, &sub, &sd, w.hierarchy().levels()).unwrap();
    let levels: Vec<u32> = (0..=8).collect();
    let fits: Vec<_> = [1u64, 2]
        .iter()
        .map(|&seed| {
            let a = w.sample_anchors(256, 65537.0, seed).unwrap();
            let (s, _) = deviation_series(&sub, &model, &w, &levels, &a, seed).unwrap();
            fit_exponent(&s, 2).unwrap()
        })
        .collect();
    let tol = 2.0 * (fits[0].stderr.powi(2) + fits[1].stderr.powi(2)).sqrt();
    assert!((fits[0].slope - fits[1].slope).abs() <= tol, "{fits:?}");
}

#[test]
fn doubling_anchors_is_consistent() {
    let sub = Arc::new(builtins::sym95());
    let sd = spectral_data(&sub).unwrap();
    let f = default_function(&sub, &sd);
    let k = KernelSpec::default();
    let reach = k.reach(27.0, &sub);
    let w = window_for(&sub, reach).unwrap();
    let a = w.sample_anchors(128, reach, 17).unwrap();
    let small = spectral_form(&f, &w, 27.0, &k, &a[..64]).unwrap();
    let big = spectral_form(&f, &w, 27.0, &k, &a).unwrap();
    assert!(big.g >= 0.0 && small.g >= 0.0);
    assert!((big.g - small.g).abs() <= 3.0 * small.stderr, "{} vs {} ± {}", big.g, small.g, small.stderr);
}

#[test]
fn correlation_at_zero_and_far() {
    let sub = Arc::new(builtins::sym95());
    let sd = spectral_data(&sub).unwrap();
    let f = default_function(&sub, &sd);
    let w = window_for(&sub, 400.0).unwrap();
    let anchors = w.sample_anchors(128, 320.0, 3).unwrap();
    let c0 = correlation(&f, &w, [0.0, 0.0], &anchors, 48).unwrap();
    let freqs = tile_frequencies(&sd, &sub);
    let expected: f64 = freqs.iter().zip(f.square_integrals()).map(|(a, b)| a * b).sum();
    assert!((c0.value - expected).abs() <= 3.0 * c0.stderr.max(1e-12));
    // Beyond half the averaging box. The one-dimensional example has singular
    // spectrum and its correlations do not decay, so it is not used here.
    let far = correlation(&f, &w, [120.0, 44.4], &anchors, 48).unwrap();
    let mean = integral_mu(&f, &freqs);
    assert!((far.value - mean * mean).abs() <= 3.0 * far.stderr, "{far:?}");
}
