use bi_core::config::{InitialCondition, RunConfig};
use bi_core::diagnostics::{check_estimate_e, check_estimate_k, DiagnosticsObserver};
use bi_core::dynamics::{BornInfeld, FieldState, Jet};
use bi_core::grid::Grid;
use bi_core::identity::{check_qnum, check_qtilde};
use bi_core::integrator::evolve;
use proptest::prelude::*;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn scale(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> f64 {
    let n = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    n(a) * n(b) + n(c) * n(d)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // <f, D1 g> = -<D1 f, g> and <f, D2 g> = <D2 f, g> on the periodic grid
    #[test]
    fn central_stencils_are_skew_and_self_adjoint(
        f in prop::collection::vec(-1.0f64..1.0, 64),
        g in prop::collection::vec(-1.0f64..1.0, 64),
    ) {
        let grid = Grid::new(3.0, 64).unwrap();
        let (d1f, d1g) = (grid.d1(&f).unwrap(), grid.d1(&g).unwrap());
        let skew = dot(&f, &d1g) + dot(&d1f, &g);
        prop_assert!(skew.abs() <= 1e-12 * scale(&f, &d1g, &d1f, &g));
        let (d2f, d2g) = (grid.d2(&f).unwrap(), grid.d2(&g).unwrap());
        let sym = dot(&f, &d2g) - dot(&d2f, &g);
        prop_assert!(sym.abs() <= 1e-12 * scale(&f, &d2g, &d2f, &g));
        // constants are annihilated, so sums of derivatives vanish
        prop_assert!(d1f.iter().sum::<f64>().abs() <= 1e-12 * d1f.iter().map(|x| x.abs()).sum::<f64>().max(1.0));
    }

    #[test]
    fn small_amplitude_estimates_hold(ux in -0.3f64..=0.3, ut in -0.3f64..=0.3) {
        let (a, b) = (ux * ux, ut * ut);
        prop_assert!(check_estimate_k(a, b) <= 0.0);
        prop_assert!(check_estimate_e(a, b) <= 0.0);
        let gamma = (1.0 + a - b).sqrt();
        prop_assert!(gamma >= 0.5);
    }

    #[test]
    fn on_shell_jets_satisfy_both_identities(
        ut in -0.5f64..0.5, ux in -0.5f64..0.5, utx in -0.5f64..0.5, uxx in -0.5f64..0.5,
    ) {
        let jet = Jet::on_shell(ut, ux, utx, uxx);
        prop_assert!(check_qnum(&jet).unwrap().rel() <= 1e-12);
        prop_assert!(check_qtilde(&jet).unwrap().rel() <= 1e-12);
        prop_assert!(check_qnum(&jet.scaled(0.5)).unwrap().rel() <= 1e-12);
    }

    // u -> -u is a symmetry of the equation: the rates flip sign
    #[test]
    fn rates_are_odd_in_the_field(amp in 0.0f64..0.2, c in -2.0f64..2.0) {
        let grid = Grid::new(10.0, 128).unwrap();
        let s = FieldState {
            t: 2.0,
            u: grid.sample(|x| amp * (-(x - c) * (x - c)).exp()),
            v: grid.sample(|x| -amp * (x - c) * (-(x - c) * (x - c)).exp()),
        };
        let neg = FieldState { t: 2.0, u: s.u.iter().map(|x| -x).collect(), v: s.v.iter().map(|x| -x).collect() };
        let sys = BornInfeld::new(grid);
        let (du, dv) = sys.rhs(&s).unwrap();
        let (nu, nv) = sys.rhs(&neg).unwrap();
        for i in 0..du.len() {
            prop_assert_eq!(du[i], -nu[i]);
            prop_assert!((dv[i] + nv[i]).abs() <= 1e-15);
        }
    }
}

fn diagnosed(cfg: &RunConfig) -> Vec<[f64; 12]> {
    let grid = cfg.grid().unwrap();
    let mut obs = DiagnosticsObserver::new(grid.clone(), cfg.weights().unwrap(), cfg.fixed_window);
    let init = cfg.initial.build(&grid, cfg.t_start).unwrap();
    let r = evolve(cfg, init, &mut [&mut obs]).unwrap();
    assert!(r.completed());
    obs.records.iter().map(|r| r.csv_values()).collect()
}

#[test]
fn identical_configs_give_bit_identical_records() {
    let cfg = RunConfig {
        half_length: 30.0,
        points: 512,
        horizon: 12.0,
        initial: InitialCondition::Gaussian {
            amplitude: 0.05,
            center: 0.5,
            width: 1.0,
            velocity_scale: 1.0,
        },
        ..RunConfig::default()
    };
    let a = diagnosed(&cfg);
    let b = diagnosed(&cfg);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        for (p, q) in x.iter().zip(y) {
            assert_eq!(p.to_bits(), q.to_bits());
        }
    }
    // integra partials never decrease
    assert!(a.windows(2).all(|w| w[1][10] >= w[0][10]));
}
