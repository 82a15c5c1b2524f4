//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `--nocapture` to see them on success).

use std::time::Instant;

use polydiff::analysis::{rate_estimates, rearrange_retained, weighted_l2_diagnostic};
use polydiff::fem1d::{load_from_energy_pair, FemSpace, Mesh, WeightFn};
use polydiff::fields::{
    compute_delta, inclusion_breakpoints, make_disjoint_inclusions, make_fourier, make_haar,
    weights_finite_overlap, weights_wavelet, CoefficientField, FamilyConfig,
};
use polydiff::galerkin::{adaptive_solve, quadrature_mean_square_norm, quadrature_oracle, DEGREE_CAP};
use polydiff::multiindex::{legendre_weight, monomial_weight, MultiIndex};
use polydiff::operators::OperatorSet;
use polydiff::runner::{self, Mode};
use polydiff::taylor::{greedy_expand, simplex_size, TaylorExpansion};

fn report(criterion: u32, name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion:02} ({name}): {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} ({name}) failed: {detail}");
}

fn constant_load(space: &FemSpace) -> Vec<f64> {
    polydiff::fem1d::load_constant(space, 1.0)
}

#[test]
fn acceptance_01_constant_field_taylor_oracle() {
    let started = Instant::now();
    let theta = 0.5;
    let b: Vec<f64> = (1..=4).map(|j| theta * 2f64.powi(-j)).collect();
    let psis = b.iter().map(|&v| WeightFn::Constant(v)).collect();
    let field = CoefficientField::custom(WeightFn::Constant(1.0), psis).unwrap();
    let space = FemSpace::new(Mesh::uniform(32));
    let load = constant_load(&space);
    let ops = OperatorSet::build(&field, &space).unwrap();

    let map = greedy_expand(&field, &space, &load, simplex_size(4, 6), 1.0).unwrap();
    let t0 = map
        .get(&MultiIndex::zero())
        .and_then(|e| e.vector.as_ref())
        .unwrap()
        .clone();
    let t0_norm = ops.v_norm(&t0);

    let mut max_rel = 0.0_f64;
    let mut checked = 0usize;
    for (nu, entry) in map.iter() {
        let order = nu.total_order();
        if order > 6 || entry.vector.is_none() {
            continue;
        }
        let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
        let scale = sign * nu.factorial_ratio().unwrap() * monomial_weight(&b, nu);
        let diff: Vec<f64> = entry
            .vector
            .as_ref()
            .unwrap()
            .iter()
            .zip(&t0)
            .map(|(v, t)| v - scale * t)
            .collect();
        max_rel = max_rel.max(ops.v_norm(&diff) / (scale.abs() * t0_norm));
        checked += 1;
    }
    let elapsed = started.elapsed().as_secs_f64();
    report(
        1,
        "constant-field taylor oracle",
        checked == simplex_size(4, 6) && max_rel <= 1e-9 && elapsed < 10.0,
        &format!("{checked} coefficients, max rel deviation {max_rel:.3e}, {elapsed:.1} s"),
    );
}

#[test]
fn acceptance_02_layer_decay() {
    let started = Instant::now();
    // each experiment family at theta = 1/2, truncated small enough that
    // complete layers up to |nu| = 5 are affordable
    let cases: Vec<(&str, CoefficientField, FemSpace)> = vec![
        (
            "inclusions",
            make_disjoint_inclusions(1.0, 0.5, 8).unwrap(),
            FemSpace::new(Mesh::refined(&inclusion_breakpoints(8), 64).unwrap()),
        ),
        (
            "fourier",
            make_fourier(2.0, 0.5, 8).unwrap(),
            FemSpace::new(Mesh::uniform(64)),
        ),
        (
            "haar",
            make_haar(1.0, 0.5, 2).unwrap(),
            FemSpace::new(Mesh::uniform(32)),
        ),
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (name, field, space) in cases {
        let dims = field.j_count() as u32;
        let sigma = field.theta() / (2.0 - field.theta());
        let load = constant_load(&space);
        let mut exp = TaylorExpansion::new(field, space, load).unwrap();
        exp.greedy(simplex_size(dims, 5), 1.0).unwrap();
        let mut previous = exp.layer_energy(0).unwrap();
        let mut worst = 0.0_f64;
        for k in 1..=5 {
            let current = exp.layer_energy(k).unwrap();
            let slack = current - (sigma * previous + 1e-12);
            worst = worst.max(slack);
            pass &= slack <= 0.0;
            previous = current;
        }
        detail.push_str(&format!("{name}: worst slack {worst:.2e}; "));
    }
    let elapsed = started.elapsed().as_secs_f64();
    pass &= elapsed < 300.0;
    detail.push_str(&format!("{elapsed:.1} s"));
    report(2, "layer decay", pass, &detail);
}

#[test]
fn acceptance_03_weighted_summability_bounds() {
    // Taylor and Legendre weighted partial sums stay below their constants
    // for the finite-overlap weights on inclusions and the level weights on
    // Haar, on every computed prefix (monotone sums, so the full partial sum
    // suffices), together with the individual coefficient estimates and the
    // weight-ordered n-term tail inequality.
    let mut detail = String::new();
    let mut pass = true;

    let inclusions = make_disjoint_inclusions(1.0, 0.5, 64).unwrap();
    let inc_space = FemSpace::new(Mesh::refined(&inclusion_breakpoints(64), 512).unwrap());
    let haar = make_haar(1.0, 0.5, 4).unwrap();
    let haar_space = FemSpace::new(Mesh::uniform(128));

    let cases: Vec<(&str, CoefficientField, FemSpace, polydiff::fields::WeightSequence)> = vec![
        (
            "inclusions",
            inclusions.clone(),
            inc_space,
            weights_finite_overlap(&inclusions, 1, 1.0).unwrap().0,
        ),
        (
            "haar",
            haar.clone(),
            haar_space,
            weights_wavelet(&haar, 0.5).unwrap(),
        ),
    ];

    for (name, field, space, weights) in cases {
        let load = constant_load(&space);
        let delta = compute_delta(&field, &weights.rho);
        pass &= delta < 1.0;

        // Taylor side
        let tmap = greedy_expand(&field, &space, &load, 512, 0.5).unwrap();
        let (t_partial, t_bound) = weighted_l2_diagnostic(&tmap, &weights, false).unwrap();
        pass &= t_partial <= t_bound;
        // individual estimate ||t_nu||_V <= sqrt(C) rho^{-nu}
        let sqrt_c = t_bound.sqrt();
        for (nu, entry) in tmap.iter() {
            pass &= entry.v_norm * monomial_weight(&weights.rho, nu) <= sqrt_c * (1.0 + 1e-12);
        }

        // Legendre side
        let run = adaptive_solve(&field, &space, &load, 512, 0.5, 1e-10, DEGREE_CAP).unwrap();
        let (l_partial, l_bound) = weighted_l2_diagnostic(&run.map, &weights, true).unwrap();
        pass &= l_partial <= l_bound;
        let sqrt_cl = l_bound.sqrt();
        for (nu, entry) in run.map.iter() {
            let w = monomial_weight(&weights.rho, nu) / legendre_weight(nu);
            pass &= entry.v_norm * w <= sqrt_cl * (1.0 + 1e-12);
        }

        // weight-ordered n-term selection: keeping the n smallest
        // w_nu = a_nu^{-1} rho^nu, the computed tail obeys
        // tail <= sup_excluded w_nu^{-1} sqrt(C)
        let mut by_weight: Vec<(f64, &MultiIndex, f64)> = run
            .map
            .iter()
            .map(|(nu, e)| {
                let w = monomial_weight(&weights.rho, nu) / legendre_weight(nu);
                (w, nu, e.v_norm)
            })
            .collect();
        by_weight.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for n in [32usize, 128, 256] {
            let tail_sq: f64 = by_weight[n..].iter().map(|(_, _, v)| v * v).sum();
            let sup_inv = by_weight[n..]
                .iter()
                .map(|(w, _, _)| 1.0 / w)
                .fold(0.0_f64, f64::max);
            pass &= tail_sq.sqrt() <= sup_inv * sqrt_cl * (1.0 + 1e-12);
        }

        detail.push_str(&format!(
            "{name}: delta {delta:.3}, taylor {t_partial:.3e}<={t_bound:.3e}, legendre {l_partial:.3e}<={l_bound:.3e}; "
        ));
    }
    report(3, "weighted summability bounds", pass, &detail);
}

struct TableCase {
    label: &'static str,
    family: FamilyConfig,
    mode: Mode,
    reference: [f64; 2], // s_10, s_11
}

fn run_case(family: &FamilyConfig, mode: Mode) -> Vec<f64> {
    run_case_tol(family, mode, 1e-10)
}

fn run_case_tol(family: &FamilyConfig, mode: Mode, cg_tol: f64) -> Vec<f64> {
    let field = family.build().unwrap();
    let mesh = runner::family_mesh(family, None, &[]).unwrap();
    let space = FemSpace::new(mesh);
    let load = constant_load(&space);
    let map = match mode {
        Mode::Taylor => greedy_expand(&field, &space, &load, 1 << 13, 0.2).unwrap(),
        Mode::Legendre => {
            adaptive_solve(&field, &space, &load, 1 << 13, 0.5, cg_tol, DEGREE_CAP)
                .unwrap()
                .map
        }
    };
    let seq = rearrange_retained(&map);
    rate_estimates(&seq, 11).unwrap()
}

fn check_table(criterion: u32, name: &str, cases: &[TableCase], tol: f64, trend: bool) {
    let started = Instant::now();
    let mut pass = true;
    let mut detail = String::new();
    for case in cases {
        let rates = run_case(&case.family, case.mode);
        let s6 = rates[5];
        let s10 = rates[9];
        let s11 = rates[10];
        let d10 = s10 - case.reference[0];
        let d11 = s11 - case.reference[1];
        pass &= d10.abs() <= tol && d11.abs() <= tol;
        if trend {
            let target = case.family.predicted_rate().expect("table families");
            pass &= (s11 - target).abs() <= (s6 - target).abs() + 0.05;
        }
        detail.push_str(&format!(
            "{}: s10 {s10:.3} ({:+.3}), s11 {s11:.3} ({:+.3}); ",
            case.label, d10, d11
        ));
    }
    let elapsed = started.elapsed().as_secs_f64();
    detail.push_str(&format!("{elapsed:.0} s"));
    if criterion == 4 {
        pass &= elapsed <= 1800.0;
    }
    report(criterion, name, pass, &detail);
}

#[test]
fn acceptance_04_table_disjoint_inclusions() {
    let inc = |beta| FamilyConfig::Inclusions {
        beta,
        theta: 0.5,
        j: runner::inclusions_truncation(beta),
    };
    let cases = [
        TableCase {
            label: "taylor b=2",
            family: inc(2.0),
            mode: Mode::Taylor,
            reference: [2.439, 2.477],
        },
        TableCase {
            label: "taylor b=1",
            family: inc(1.0),
            mode: Mode::Taylor,
            reference: [1.650, 1.643],
        },
        TableCase {
            label: "taylor b=1/2",
            family: inc(0.5),
            mode: Mode::Taylor,
            reference: [1.196, 1.175],
        },
        TableCase {
            label: "legendre b=2",
            family: inc(2.0),
            mode: Mode::Legendre,
            reference: [2.543, 2.507],
        },
        TableCase {
            label: "legendre b=1",
            family: inc(1.0),
            mode: Mode::Legendre,
            reference: [1.660, 1.642],
        },
        TableCase {
            label: "legendre b=1/2",
            family: inc(0.5),
            mode: Mode::Legendre,
            reference: [1.169, 1.160],
        },
    ];
    check_table(4, "table 1 disjoint inclusions", &cases, 0.15, true);
}

#[test]
fn acceptance_05_table_fourier() {
    let fou = |beta| FamilyConfig::Fourier {
        beta,
        theta: 0.5,
        j: runner::fourier_truncation(beta, 0.5),
    };
    let cases = [
        TableCase {
            label: "taylor b=2",
            family: fou(2.0),
            mode: Mode::Taylor,
            reference: [1.533, 1.515],
        },
        TableCase {
            label: "taylor b=1.5",
            family: fou(1.5),
            mode: Mode::Taylor,
            reference: [1.270, 1.258],
        },
        TableCase {
            label: "taylor b=1.25",
            family: fou(1.25),
            mode: Mode::Taylor,
            reference: [1.143, 1.143],
        },
        TableCase {
            label: "legendre b=2",
            family: fou(2.0),
            mode: Mode::Legendre,
            reference: [1.637, 1.639],
        },
        TableCase {
            label: "legendre b=1.5",
            family: fou(1.5),
            mode: Mode::Legendre,
            reference: [1.341, 1.327],
        },
        TableCase {
            label: "legendre b=1.25",
            family: fou(1.25),
            mode: Mode::Legendre,
            reference: [1.173, 1.191],
        },
    ];
    check_table(5, "table 2 fourier", &cases, 0.15, false);

    // the documented gap to the predicted rate at beta = 2 for Taylor data
    let rates = run_case(&fou(2.0), Mode::Taylor);
    report(
        5,
        "table 2 fourier gap",
        rates[10] < 1.75,
        &format!("taylor b=2 s11 {:.3} < 1.75", rates[10]),
    );
}

#[test]
fn acceptance_06_table_haar() {
    let haar = |alpha| FamilyConfig::Haar {
        alpha,
        theta: 0.5,
        l_max: runner::haar_truncation(alpha, 0.5),
    };
    let cases = [
        TableCase {
            label: "taylor a=2",
            family: haar(2.0),
            mode: Mode::Taylor,
            reference: [1.799, 1.866],
        },
        TableCase {
            label: "taylor a=1",
            family: haar(1.0),
            mode: Mode::Taylor,
            reference: [1.225, 1.266],
        },
        TableCase {
            label: "taylor a=1/2",
            family: haar(0.5),
            mode: Mode::Taylor,
            reference: [0.872, 0.903],
        },
        TableCase {
            label: "legendre a=2",
            family: haar(2.0),
            mode: Mode::Legendre,
            reference: [1.909, 2.037],
        },
        TableCase {
            label: "legendre a=1",
            family: haar(1.0),
            mode: Mode::Legendre,
            reference: [1.247, 1.268],
        },
        TableCase {
            label: "legendre a=1/2",
            family: haar(0.5),
            mode: Mode::Legendre,
            reference: [0.961, 0.958],
        },
    ];
    check_table(6, "table 3 haar", &cases, 0.2, false);

    // Taylor rates on Haar data are noisier: require the upward trend
    let rates = run_case(&haar(2.0), Mode::Taylor);
    report(
        6,
        "table 3 haar trend",
        rates[10] > rates[5],
        &format!("taylor a=2: s11 {:.3} > s6 {:.3}", rates[10], rates[5]),
    );
}

#[test]
fn acceptance_07_theta_sweep() {
    let reference = [(0.5, 1.639), (0.125, 1.814), (0.03125, 1.921)];
    let mut s11 = Vec::new();
    let mut pass = true;
    let mut detail = String::new();
    for (theta, expected) in reference {
        let family = FamilyConfig::Fourier {
            beta: 2.0,
            theta,
            j: runner::fourier_truncation(2.0, theta),
        };
        // deep-rank coefficients at small theta sit near the default
        // residual floor, so the sweep solves tighter
        let cg_tol = if theta < 0.25 { 1e-13 } else { 1e-10 };
        let rates = run_case_tol(&family, Mode::Legendre, cg_tol);
        let s = rates[10];
        pass &= (s - expected).abs() <= 0.15;
        detail.push_str(&format!("theta {theta}: s11 {s:.3} (ref {expected}); "));
        s11.push(s);
    }
    // monotone increase towards 2.0
    pass &= s11[0] < s11[1] && s11[1] < s11[2] && s11[2] < 2.0 + 0.15;
    report(7, "theta sweep fourier legendre", pass, &detail);
}

#[test]
fn acceptance_08_sharpness_lower_bound() {
    // half-cell inclusions psi_j = b_j on [x_{j-1}, m_j] with hat data
    // t_0 = sum_j c_j h_j force ||t_{e_j}||_V >= b_j c_j / sqrt(|D_j|)
    let j_count = 32usize;
    let points = inclusion_breakpoints(j_count);
    let mids: Vec<f64> = points.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

    let b: Vec<f64> = (1..=j_count).map(|j| (j as f64).powf(-0.9)).collect();
    let widths: Vec<f64> = points.windows(2).map(|w| w[1] - w[0]).collect();
    let c: Vec<f64> = (1..=j_count)
        .map(|j| widths[j - 1].sqrt() * (j as f64).powf(-0.6))
        .collect();

    let psis: Vec<WeightFn> = (0..j_count)
        .map(|j| WeightFn::PiecewiseConstant {
            breakpoints: vec![points[j], mids[j]],
            values: vec![b[j]],
        })
        .collect();
    // theta = max b_j = 1: individual coefficients remain well defined
    let field = CoefficientField::custom_unchecked(WeightFn::Constant(1.0), psis).unwrap();

    let mesh_points: Vec<f64> = points.iter().copied().chain(mids.iter().copied()).collect();
    let space = FemSpace::new(Mesh::refined(&mesh_points, 512).unwrap());

    // g = sum c_j h_j: piecewise linear through cell boundaries (0) and
    // midpoints (c_j)
    let mut g_breaks = Vec::new();
    let mut g_values = Vec::new();
    for j in 0..j_count {
        g_breaks.push(points[j]);
        g_values.push(0.0);
        g_breaks.push(mids[j]);
        g_values.push(c[j]);
    }
    g_breaks.push(points[j_count]);
    g_values.push(0.0);
    let load = load_from_energy_pair(&space, &g_breaks, &g_values).unwrap();

    let mut exp = TaylorExpansion::new(field, space, load).unwrap();
    let mut pass = true;
    let mut worst = f64::INFINITY;
    for j in 1..=j_count {
        let nu = MultiIndex::unit(j as u32);
        exp.step(&nu).unwrap();
        let norm = exp.map().get(&nu).unwrap().v_norm;
        let bound = b[j - 1] * c[j - 1] / widths[j - 1].sqrt();
        let ratio = norm / bound;
        worst = worst.min(ratio);
        pass &= norm >= bound * (1.0 - 1e-3);
    }
    report(
        8,
        "sharpness lower bound",
        pass,
        &format!("worst norm/bound ratio {worst:.6} over j <= {j_count}"),
    );
}

#[test]
fn acceptance_09_legendre_quadrature_oracle() {
    let started = Instant::now();
    let field =
        CoefficientField::custom(WeightFn::Constant(1.0), vec![WeightFn::Constant(0.5)]).unwrap();
    let space = FemSpace::new(Mesh::uniform(32));
    let load = constant_load(&space);

    let run = adaptive_solve(&field, &space, &load, 31, 0.5, 1e-14, DEGREE_CAP).unwrap();
    let mut max_rel = 0.0_f64;
    for k in 0..=10u32 {
        let nu = MultiIndex::from_pairs([(1, k)]);
        let oracle = quadrature_oracle(&field, &space, &load, &nu, 34).unwrap();
        let computed = run.map.get(&nu).unwrap().v_norm;
        max_rel = max_rel.max((computed - oracle).abs() / oracle);
    }

    let mut coefficient_sum = 0.0;
    for k in 0..=30u32 {
        let nu = MultiIndex::from_pairs([(1, k)]);
        let value = quadrature_oracle(&field, &space, &load, &nu, 34).unwrap();
        coefficient_sum += value * value;
    }
    let mean_square = quadrature_mean_square_norm(&field, &space, &load, 34).unwrap();
    let parseval_rel = (coefficient_sum - mean_square).abs() / mean_square;

    let elapsed = started.elapsed().as_secs_f64();
    report(
        9,
        "legendre quadrature oracle",
        max_rel <= 1e-8 && parseval_rel <= 1e-8 && elapsed < 60.0,
        &format!(
            "max rel {max_rel:.3e}, parseval defect {parseval_rel:.3e}, {elapsed:.1} s"
        ),
    );
}

#[test]
fn acceptance_10_reproduce_tables_deterministic() {
    // byte-identical CSV artifacts across two full suite executions
    // (reduced retained size keeps the double run affordable)
    let root = std::env::temp_dir().join("polydiff-acceptance-determinism");
    let _ = std::fs::remove_dir_all(&root);
    let first = root.join("first");
    let second = root.join("second");
    runner::reproduce_tables(&first, 256).unwrap();
    runner::reproduce_tables(&second, 256).unwrap();

    let mut compared = 0usize;
    let mut pass = true;
    for entry in walk_csvs(&first) {
        let relative = entry.strip_prefix(&first).unwrap().to_path_buf();
        let other = second.join(&relative);
        let a = std::fs::read(&entry).unwrap();
        let b = std::fs::read(&other).unwrap_or_default();
        if a != b {
            pass = false;
            println!("  mismatch: {}", relative.display());
        }
        compared += 1;
    }
    pass &= compared > 22; // per-run artifacts plus the consolidated report
    report(
        10,
        "reproduce-tables determinism",
        pass,
        &format!("{compared} CSV files byte-compared"),
    );
    let _ = std::fs::remove_dir_all(&root);
}

fn walk_csvs(root: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut found = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                found.push(path);
            }
        }
    }
    found.sort();
    found
}
