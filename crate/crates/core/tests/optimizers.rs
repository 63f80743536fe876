use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vitalvmd::{ga_optimize, optimize, Bounds, GaConfig, NrboConfig};

fn sphere(k: usize, alpha: f64) -> f64 {
    (k as f64 - 6.0).powi(2) + ((alpha - 2000.0) / 500.0).powi(2)
}

fn sphere_bounds() -> Bounds {
    Bounds::new([2, 12], [200.0, 8000.0]).unwrap()
}

/// Exhaustive minimum over every integer K and a 1-unit α grid.
fn grid_minimum(f: impl Fn(usize, f64) -> f64, b: &Bounds) -> (usize, f64, f64) {
    let mut best = (0, 0.0, f64::INFINITY);
    for k in b.k_range[0]..=b.k_range[1] {
        let mut a = b.alpha_range[0];
        while a <= b.alpha_range[1] {
            let v = f(k, a);
            if v < best.2 {
                best = (k, a, v);
            }
            a += 1.0;
        }
    }
    best
}

/// A rugged landscape: random Gaussian wells over a tilted plane.
fn landscape(seed: u64) -> impl Fn(usize, f64) -> f64 + Sync {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let wells: Vec<(f64, f64, f64, f64)> = (0..8)
        .map(|_| (rng.random_range(3.0..10.0), rng.random_range(500.0..8000.0), rng.random_range(0.5..3.0), rng.random_range(200.0..2000.0)))
        .collect();
    let tilt: f64 = rng.random_range(-0.2..0.2);
    move |k, a| {
        let mut v = tilt * k as f64;
        for &(wk, wa, depth, width) in &wells {
            v -= depth * (-((k as f64 - wk).powi(2) / 2.0 + ((a - wa) / width).powi(2))).exp();
        }
        v
    }
}

#[test]
fn sphere_benchmark_finds_the_grid_optimum() {
    let b = sphere_bounds();
    let (gk, ga, gv) = grid_minimum(sphere, &b);
    assert_eq!((gk, ga, gv), (6, 2000.0, 0.0));
    let cfg = NrboConfig { population_n: 20, max_iterations: 150, seed: 7, ..Default::default() };
    let r = optimize(sphere, &b, &cfg).unwrap();
    assert!(r.best.fitness < 0.5, "{:?}", r.best);
    assert_eq!(r.best.k_modes, gk);
    assert!(r.best.fitness - gv < 0.5);
}

#[test]
fn zero_iterations_returns_best_initial_member() {
    let calls = std::sync::Mutex::new(Vec::new());
    let f = |k: usize, a: f64| {
        let v = sphere(k, a);
        calls.lock().unwrap().push(v);
        v
    };
    let cfg = NrboConfig { max_iterations: 0, seed: 3, ..Default::default() };
    let r = optimize(f, &sphere_bounds(), &cfg).unwrap();
    let seen = calls.into_inner().unwrap();
    assert_eq!(r.history.len(), 1);
    assert_eq!(seen.len(), cfg.population_n);
    assert_eq!(r.best.fitness, seen.iter().cloned().fold(f64::INFINITY, f64::min));
}

#[test]
fn reruns_are_bit_identical() {
    for seed in [0, 1, 99] {
        let cfg = NrboConfig { population_n: 12, max_iterations: 40, seed, ..Default::default() };
        let f = landscape(seed);
        let a = optimize(&f, &Bounds::default(), &cfg).unwrap();
        let b = optimize(&f, &Bounds::default(), &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.best.alpha.to_bits(), b.best.alpha.to_bits());
        let ga = GaConfig { seed, ..Default::default() };
        assert_eq!(ga_optimize(&f, &Bounds::default(), &ga).unwrap(), ga_optimize(&f, &Bounds::default(), &ga).unwrap());
    }
}

#[test]
fn invalid_configurations_are_rejected() {
    let b = Bounds::default();
    let small = NrboConfig { population_n: 3, ..Default::default() };
    assert!(optimize(sphere, &b, &small).is_err());
    let empty = Bounds { k_range: [5, 4], alpha_range: [500.0, 8000.0] };
    assert!(optimize(sphere, &empty, &NrboConfig::default()).is_err());
    assert!(Bounds::new([3, 10], [900.0, 800.0]).is_err());
    assert!(ga_optimize(sphere, &b, &GaConfig { population_n: 1, ..Default::default() }).is_err());
}

#[test]
fn stall_limit_stops_a_flat_search() {
    let cfg = NrboConfig { max_iterations: 200, stall_limit: 5, ..Default::default() };
    let r = optimize(|_, _| 1.0, &Bounds::default(), &cfg).unwrap();
    assert_eq!(r.history.len(), 6);
    let unlimited = NrboConfig { stall_limit: 0, max_iterations: 12, ..cfg };
    assert_eq!(optimize(|_, _| 1.0, &Bounds::default(), &unlimited).unwrap().history.len(), 13);
}

#[test]
fn trace_tracks_history() {
    let cfg = NrboConfig { max_iterations: 25, seed: 4, ..Default::default() };
    let r = optimize(landscape(4), &Bounds::default(), &cfg).unwrap();
    assert_eq!(r.trace.len(), r.history.len());
    for (i, (t, h)) in r.trace.iter().zip(&r.history).enumerate() {
        assert_eq!(t.iter, i);
        assert_eq!(t.best_fitness, *h);
    }
    let last = r.trace.last().unwrap();
    assert_eq!((last.best_k, last.best_alpha, last.best_fitness), (r.best.k_modes, r.best.alpha, r.best.fitness));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn nrbo_history_is_monotone_and_bounded(seed in any::<u64>(), n in 4usize..16, iters in 0usize..40) {
        let f = landscape(seed);
        let b = Bounds::default();
        let outside = AtomicBool::new(false);
        let calls = AtomicUsize::new(0);
        let probe = |k: usize, a: f64| {
            calls.fetch_add(1, Ordering::Relaxed);
            if !b.contains(k, a) {
                outside.store(true, Ordering::Relaxed);
            }
            f(k, a)
        };
        let cfg = NrboConfig { population_n: n, max_iterations: iters, seed, ..Default::default() };
        let r = optimize(probe, &b, &cfg).unwrap();
        prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(!outside.load(Ordering::Relaxed));
        prop_assert!(b.contains(r.best.k_modes, r.best.alpha));
        prop_assert_eq!(r.evaluations, calls.load(Ordering::Relaxed));
        prop_assert!(r.evaluations <= n * (3 * iters + 1));
        prop_assert_eq!(r.best.fitness, f(r.best.k_modes, r.best.alpha));
        prop_assert_eq!(*r.history.last().unwrap(), r.best.fitness);
    }

    #[test]
    fn ga_history_is_monotone_and_bounded(seed in any::<u64>(), n in 2usize..16, gens in 0usize..30) {
        let f = landscape(seed);
        let b = Bounds::default();
        let outside = AtomicBool::new(false);
        let calls = AtomicUsize::new(0);
        let probe = |k: usize, a: f64| {
            calls.fetch_add(1, Ordering::Relaxed);
            if !b.contains(k, a) {
                outside.store(true, Ordering::Relaxed);
            }
            f(k, a)
        };
        let cfg = GaConfig { population_n: n, generations: gens, seed, ..Default::default() };
        let r = ga_optimize(probe, &b, &cfg).unwrap();
        prop_assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(!outside.load(Ordering::Relaxed));
        prop_assert_eq!(r.evaluations, calls.load(Ordering::Relaxed));
        prop_assert!(r.evaluations <= n * (gens + 1));
        prop_assert_eq!(r.history.len(), gens + 1);
    }

    #[test]
    fn nan_fitness_never_wins(seed in 0u64..500) {
        let f = landscape(seed);
        let g = |k: usize, a: f64| if k % 2 == 0 { f64::NAN } else { f(k, a) };
        let cfg = NrboConfig { max_iterations: 10, seed, ..Default::default() };
        let r = optimize(g, &Bounds::default(), &cfg).unwrap();
        prop_assert!(r.best.k_modes % 2 == 1 || r.best.fitness.is_infinite());
    }
}
