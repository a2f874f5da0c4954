//! Exercises the C ABI the way a foreign caller would: raw pointers, status
//! codes, and the thread-local error message.

use std::ffi::CStr;

use graph_rank_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(grk_last_error_message()) }
        .to_string_lossy()
        .into_owned()
}

#[test]
fn fit_round_trip_through_the_c_surface() {
    unsafe {
        let graph = grk_graph_new(3);
        assert!(!graph.is_null());
        assert_eq!(grk_graph_items(graph), 3);

        for (i, j, y) in [(0usize, 1usize, 1.0f64), (0, 2, 2.0), (1, 2, 1.0)] {
            assert_eq!(grk_graph_add_comparison(graph, i, j, y), grk_status::GRK_OK);
        }
        assert_eq!(grk_graph_comparisons(graph), 3);

        let mut fit: *mut grk_fit = std::ptr::null_mut();
        assert_eq!(grk_fit_sum_zero(graph, &mut fit), grk_status::GRK_OK);
        assert!(!fit.is_null());
        assert_eq!(grk_fit_items(fit), 3);

        let mut merits = [0.0f64; 3];
        assert_eq!(
            grk_fit_merits(fit, merits.as_mut_ptr(), merits.len()),
            grk_status::GRK_OK
        );
        assert!((merits[0] - 1.0).abs() < 1e-9);
        assert!(merits[1].abs() < 1e-9);
        assert!((merits[2] + 1.0).abs() < 1e-9);

        let mut ranks = [0u32; 3];
        assert_eq!(
            grk_fit_ranks(fit, ranks.as_mut_ptr(), ranks.len()),
            grk_status::GRK_OK
        );
        assert_eq!(ranks, [1, 2, 3]);

        assert!((grk_fit_lambda2(fit) - 3.0).abs() < 1e-9);
        assert_eq!(grk_fit_bottleneck(fit), 1);
        assert!(grk_fit_sigma2(fit).abs() < 1e-12);

        let mut variance = f64::NAN;
        assert_eq!(
            grk_fit_pair_variance(fit, 0, 2, &mut variance),
            grk_status::GRK_OK
        );
        assert!(variance.abs() < 1e-12); // exact fit: zero residual variance

        grk_fit_free(fit);
        grk_graph_free(graph);
    }
}

#[test]
fn anchored_fit_pins_the_anchor() {
    unsafe {
        let graph = grk_graph_new(3);
        for (i, j, y) in [(0usize, 1usize, 1.0f64), (0, 2, 2.0), (1, 2, 1.0)] {
            grk_graph_add_comparison(graph, i, j, y);
        }
        let mut fit: *mut grk_fit = std::ptr::null_mut();
        assert_eq!(grk_fit_anchored(graph, 0, &mut fit), grk_status::GRK_OK);
        let mut merits = [0.0f64; 3];
        grk_fit_merits(fit, merits.as_mut_ptr(), 3);
        assert!(merits[0].abs() < 1e-12);
        assert!((merits[1] + 1.0).abs() < 1e-9);
        assert!((merits[2] + 2.0).abs() < 1e-9);
        grk_fit_free(fit);
        grk_graph_free(graph);
    }
}

#[test]
fn status_codes_and_messages() {
    unsafe {
        // Too few items.
        assert!(grk_graph_new(1).is_null());
        assert!(last_error().contains("2 items"));

        // Null handles.
        let mut fit: *mut grk_fit = std::ptr::null_mut();
        assert_eq!(
            grk_fit_sum_zero(std::ptr::null(), &mut fit),
            grk_status::GRK_NULL_POINTER
        );
        assert_eq!(
            grk_graph_add_comparison(std::ptr::null_mut(), 0, 1, 1.0),
            grk_status::GRK_NULL_POINTER
        );

        let graph = grk_graph_new(4);
        // Bad arguments.
        assert_eq!(
            grk_graph_add_comparison(graph, 2, 2, 1.0),
            grk_status::GRK_INVALID_ARGUMENT
        );
        assert_eq!(
            grk_graph_add_comparison(graph, 0, 9, 1.0),
            grk_status::GRK_INVALID_ARGUMENT
        );
        assert_eq!(
            grk_graph_add_comparison(graph, 0, 1, f64::NAN),
            grk_status::GRK_INVALID_ARGUMENT
        );

        // Empty graph.
        assert_eq!(
            grk_fit_sum_zero(graph, &mut fit),
            grk_status::GRK_NO_COMPARISONS
        );

        // Disconnected graph: {0,1} and {2,3}.
        grk_graph_add_comparison(graph, 0, 1, 1.0);
        grk_graph_add_comparison(graph, 2, 3, 1.0);
        assert_eq!(
            grk_fit_sum_zero(graph, &mut fit),
            grk_status::GRK_DISCONNECTED
        );
        assert!(last_error().contains("disconnected"), "{}", last_error());

        grk_graph_free(graph);

        // Null frees are no-ops.
        grk_graph_free(std::ptr::null_mut());
        grk_fit_free(std::ptr::null_mut());
    }
}

#[test]
fn length_mismatch_is_rejected() {
    unsafe {
        let graph = grk_graph_new(2);
        grk_graph_add_comparison(graph, 0, 1, 2.0);
        let mut fit: *mut grk_fit = std::ptr::null_mut();
        assert_eq!(grk_fit_sum_zero(graph, &mut fit), grk_status::GRK_OK);
        let mut too_short = [0.0f64; 1];
        assert_eq!(
            grk_fit_merits(fit, too_short.as_mut_ptr(), 1),
            grk_status::GRK_INVALID_ARGUMENT
        );
        grk_fit_free(fit);
        grk_graph_free(graph);
    }
}

#[test]
fn generated_header_covers_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("include")
        .join("graph_rank.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build.rs");
    for symbol in [
        "grk_graph_new",
        "grk_graph_add_comparison",
        "grk_fit_sum_zero",
        "grk_fit_anchored",
        "grk_fit_merits",
        "grk_fit_ranks",
        "grk_fit_pair_variance",
        "grk_last_error_message",
        "GRK_DISCONNECTED",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}
