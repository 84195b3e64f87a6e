use stabcp::conformal::{ConformalMethod, CpConfig, MethodInput, PredictionSet};
use stabcp::data::{gen_synthetic, load_csv, write_csv};
use stabcp::registry::Fitted;
use stabcp::screening::{run_screening, ScreeningConfig, ScreeningMethod, Thresholds};
use stabcp::stability::ZeroStability;
use stabcp::trainers::{Trainer, FitCounter};
use stabcp::models::Predictor;
use stabcp::{Dataset, Error, Registry, Result, SyntheticSpec, TrainerSpec};

fn small(seed: u64) -> (Dataset, Dataset) {
    gen_synthetic(&SyntheticSpec { n: 70, m: 6, d: 3, seed, ..SyntheticSpec::default() }).unwrap()
}

fn predict(registry: &Registry, method: &str, trainer: &str, train: &Dataset, test: &Dataset) -> Result<(Vec<PredictionSet>, u64)> {
    let spec = TrainerSpec { bags: 20, ..TrainerSpec::default() };
    let fitted = registry.trainer(trainer, &spec, train)?;
    let cfg = CpConfig { grid: stabcp::GridSpec::Auto { points: 15, sd_multiple: 3.0 }, n_splits: 5, ..CpConfig::default() };
    let input = MethodInput {
        train,
        test,
        trainer: fitted.trainer.as_ref(),
        stability: fitted.stability.as_ref(),
        cfg: &cfg,
    };
    let sets = registry.method(method)?.predict(&input)?;
    Ok((sets, fitted.trainer.fit_count()))
}

#[test]
fn every_builtin_trainer_runs_every_method() {
    let registry = Registry::builtin();
    let (train, test) = small(1);
    for trainer in registry.trainer_names() {
        for method in registry.method_names() {
            let result = predict(&registry, method, trainer, &train, &test);
            if trainer == "bagging" && method == "ro-stab" {
                assert!(matches!(result, Err(Error::Unsupported(_))), "bagging has no replace-one bound");
                continue;
            }
            let (sets, fits) = result.unwrap_or_else(|e| panic!("{trainer}/{method}: {e}"));
            assert_eq!(sets.len(), test.n());
            for s in &sets {
                assert!(s.length().is_finite(), "{trainer}/{method}");
                if method != "full" && method != "mm-split" {
                    assert!(!s.is_empty(), "{trainer}/{method}");
                }
            }
            if method == "loo-stab" {
                assert_eq!(fits, 1, "{trainer}");
            }
        }
    }
}

#[test]
fn loo_stabcp_covers_at_nominal_level() {
    let registry = Registry::builtin();
    let mut covered = 0usize;
    let mut total = 0usize;
    for seed in 0..150 {
        let (train, test) = gen_synthetic(&SyntheticSpec { n: 40, m: 20, d: 5, seed, ..SyntheticSpec::default() }).unwrap();
        let (sets, _) = predict(&registry, "loo-stab", "rlm", &train, &test).unwrap();
        let y = test.responses().unwrap();
        covered += sets.iter().zip(y.iter()).filter(|(s, &v)| s.contains(v)).count();
        total += sets.len();
    }
    let rate = covered as f64 / total as f64;
    // 3000 test points: three standard errors below 0.9 is about 0.884
    assert!(rate >= 0.884, "coverage {rate}");
}

struct Wide;

impl ConformalMethod for Wide {
    fn name(&self) -> &str {
        "wide"
    }

    fn predict(&self, input: &MethodInput<'_>) -> Result<Vec<PredictionSet>> {
        Ok((0..input.test.n()).map(|_| PredictionSet::interval(0.0, f64::INFINITY)).collect())
    }
}

struct Zero {
    counter: FitCounter,
}

struct ZeroModel;

impl Predictor for ZeroModel {
    fn predict(&self, _x: &[f64]) -> f64 {
        0.0
    }
}

impl Trainer for Zero {
    fn name(&self) -> &str {
        "zero"
    }

    fn fit(&self, _data: &Dataset) -> Result<Box<dyn Predictor>> {
        self.counter.increment();
        Ok(Box::new(ZeroModel))
    }

    fn counter(&self) -> &FitCounter {
        &self.counter
    }
}

#[test]
fn custom_strategies_register_by_name() {
    let mut registry = Registry::builtin();
    registry.register_method("wide", || Box::new(Wide));
    registry.register_trainer("zero", |_, _| Ok(Fitted { trainer: Box::new(Zero { counter: FitCounter::new() }), stability: Box::new(ZeroStability) }));
    let (train, test) = small(2);
    let (sets, _) = predict(&registry, "wide", "rlm", &train, &test).unwrap();
    assert!(sets.iter().all(|s| s.contains(1e300)));
    // a constant predictor is exactly stable, so LOO and RO coincide
    let (loo, fits) = predict(&registry, "loo-stab", "zero", &train, &test).unwrap();
    let (ro, _) = predict(&registry, "ro-stab", "zero", &train, &test).unwrap();
    assert_eq!(fits, 1);
    assert_eq!(loo, ro.into_iter().map(|mut s| { s.guess = None; s }).collect::<Vec<_>>());
    assert!(matches!(registry.method("nope"), Err(Error::InvalidConfig(_))));
}

#[test]
fn csv_round_trip_preserves_values() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let (train, _) = small(3);
    write_csv(&train, &path, "y").unwrap();
    let back = load_csv(&path, "y").unwrap();
    assert_eq!(back.x, train.x);
    assert_eq!(back.y, train.y);
}

#[test]
fn screening_pvalues_lie_on_the_rank_grid() {
    let registry = Registry::builtin();
    let (train, test) = small(4);
    let n = train.n() as f64;
    for method in ScreeningMethod::ALL {
        let fitted = registry.trainer("sgd", &TrainerSpec::default(), &train).unwrap();
        let cfg = ScreeningConfig { thresholds: Thresholds::Constant(0.0), ..ScreeningConfig::default() };
        let r = run_screening(&train, &test, &cfg, method, fitted.trainer.as_ref(), fitted.stability.as_ref()).unwrap();
        assert_eq!(r.p_values.len(), test.n());
        for p in &r.p_values {
            assert!((0.0..=1.0).contains(p));
            if method != ScreeningMethod::CfBh {
                assert!(*p >= 1.0 / (n + 1.0));
                let k = p * (n + 1.0);
                assert!((k - k.round()).abs() < 1e-9);
            }
        }
        assert!(r.fdp.is_some() && r.power.is_some());
    }
}
