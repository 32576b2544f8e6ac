use lolws_core::losses::PenaltyKind;
use lolws_demo::{compare_view, keyword_view, parse_penalty, penalty_curve_view};

#[test]
fn single_present_keyword_has_unit_gradient_only_on_itself() {
    let v = keyword_view(&[true, false, false], 0.0).unwrap();
    assert_eq!(v.fire_probability, 1.0);
    assert_eq!(v.gradient, vec![1.0, 0.0, 0.0]);
}

#[test]
fn smoothing_spreads_gradient_to_absent_keywords() {
    let v = keyword_view(&[false, false, false, false], 0.2).unwrap();
    // Each φ_j = 0.1: P(fire) = 1 − 0.9⁴, gradient 0.9³ everywhere.
    assert!((v.fire_probability - (1.0 - 0.9f64.powi(4))).abs() < 1e-12);
    for g in v.gradient {
        assert!((g - 0.9f64.powi(3)).abs() < 1e-12);
    }
    assert!(keyword_view(&[], 0.1).is_err());
    assert!(keyword_view(&[true], 1.5).is_err());
}

#[test]
fn penalty_curve_is_zero_past_the_threshold() {
    let kind = parse_penalty("Square").unwrap();
    assert_eq!(kind, PenaltyKind::Square);
    let pts = penalty_curve_view(kind, 2.0, 0.5, -1.0, 2.0, 31).unwrap();
    assert_eq!(pts.len(), 31);
    for p in &pts {
        let r = (1.0 - p.model_gradient).max(0.0);
        assert!((p.penalty - r * r).abs() < 1e-12);
        assert!((p.sensitivity + 2.0 * r).abs() < 1e-12);
    }
    assert!(parse_penalty("cubic").is_err());
    assert!(penalty_curve_view(kind, 1.0, 1.0, 1.0, 0.0, 10).is_err());
}

#[test]
fn comparison_trains_both_methods() {
    let c = compare_view(1, 100, 0.1, 3.0, 4).unwrap();
    assert_eq!(c.train_examples, 100);
    assert_eq!(c.lol.validation_accuracy.len(), 4);
    assert!(c.lol.penalty_loss.iter().any(|p| *p > 0.0));
    assert!(c.simple.penalty_loss.iter().all(|p| *p == 0.0));
    assert!((0.0..=1.0).contains(&c.lol.test_accuracy));
    assert_eq!(c, compare_view(1, 100, 0.1, 3.0, 4).unwrap());
}
