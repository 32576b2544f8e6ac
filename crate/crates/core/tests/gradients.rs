mod common;

#[test]
fn param_grad_matches_finite_differences() {
    common::param_grad_check().unwrap();
}

#[test]
fn input_grad_matches_finite_differences() {
    common::input_grad_check().unwrap();
}

#[test]
fn input_grad_functional_param_grad_matches_finite_differences() {
    common::penalty_param_grad_check().unwrap();
}

#[test]
fn linear_softmax_closed_form() {
    common::linear_softmax_check().unwrap();
}

#[test]
fn full_objective_gradient_matches_finite_differences() {
    common::full_objective_check().unwrap();
}
