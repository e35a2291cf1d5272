use illposed_bench::integration_data;

#[test]
fn inputs_have_matching_shapes() {
    for n in [32, 128] {
        let (a, y) = integration_data(n);
        assert_eq!((a.rows(), a.cols(), y.len()), (n, n, n));
        assert!(y.iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}
