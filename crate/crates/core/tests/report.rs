use fsmguard::report::*;
use proptest::prelude::*;

fn outcomes(task: Task, class: &str, successes: usize, inputs: usize, t: Option<f64>) -> Vec<Outcome> {
    (0..inputs)
        .map(|i| Outcome {
            task,
            class: class.into(),
            success: i < successes,
            temperature: t,
        })
        .collect()
}

/// Half-up rounding by quotient and remainder.
fn oracle(s: u64, n: u64) -> String {
    let q = s * 10_000 / n;
    let r = s * 10_000 % n;
    let c = if 2 * r >= n { q + 1 } else { q };
    format!("{}.{:02}", c / 100, c % 100)
}

#[test]
fn table_rows() {
    assert_eq!(rate(143, 152).unwrap().to_string(), "94.08");
    assert_eq!(rate(216, 273).unwrap().to_string(), "79.12");
    assert_eq!(rate(0, 0), Err(ReportError::EmptyExperiment));
    let r = compute_metrics(&outcomes(Task::Insertion, "MISSING_DEFAULT", 143, 152, None)).unwrap();
    assert_eq!(r.rows[0].rate.to_string(), "94.08");
    assert!(r.sweep.is_none());
    let json = r.to_json();
    assert!(json.contains("\"rate\": 94.08"));
    let back: ExperimentReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
    assert_eq!(compute_metrics(&[]).unwrap_err().to_string(), "empty experiment");
}

#[test]
fn mixed_tasks_rejected() {
    let mut o = outcomes(Task::Detection, "A", 1, 2, None);
    o.extend(outcomes(Task::Mitigation, "A", 1, 2, None));
    assert!(matches!(compute_metrics(&o), Err(ReportError::MixedTasks(..))));
}

#[test]
fn sweep_series_ordered() {
    let mut o = Vec::new();
    for i in (0..=10).rev() {
        o.extend(outcomes(Task::Detection, "STATIC_DEADLOCK", i, 10, Some(i as f64 / 10.0)));
    }
    let r = compute_metrics(&o).unwrap();
    let sw = r.sweep.as_ref().unwrap();
    assert_eq!(sw.len(), 11);
    assert!(sw.windows(2).all(|w| w[0].temperature < w[1].temperature));
    assert_eq!(sw[3].rate.to_string(), "30.00");
    assert_eq!(r.to_json(), compute_metrics(&o).unwrap().to_json());
}

proptest! {
    #[test]
    fn rounding_matches_oracle(n in 1u64..100_000, frac in 0.0f64..=1.0) {
        let s = ((n as f64) * frac) as u64;
        prop_assert_eq!(rate(s, n).unwrap().to_string(), oracle(s, n));
    }
}
