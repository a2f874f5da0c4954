//! C ABI for the graph-rank library.
//!
//! The surface is a pair of opaque handles: `grk_graph` collects comparisons
//! and `grk_fit` holds a completed merit fit. Every fallible call returns a
//! `grk_status`; on failure a human-readable message is available from
//! `grk_last_error_message` until the next failing call on the same thread.
//!
//! Handles are created and released by this library only (`grk_*_free`).
//! Passing a handle to any function after freeing it is undefined behavior,
//! as with any C object API.

#![allow(non_camel_case_types)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use graph_rank::{
    fit, pairwise_difference_variance, ComparisonGraph, ComparisonRecord, Constraint, Error,
    MeritFit,
};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum grk_status {
    GRK_OK = 0,
    GRK_NULL_POINTER = 1,
    GRK_INVALID_ARGUMENT = 2,
    GRK_DISCONNECTED = 3,
    GRK_NOT_IDENTIFIABLE = 4,
    GRK_DEGENERATE_VARIANCE = 5,
    GRK_NO_COMPARISONS = 6,
    GRK_INTERNAL_ERROR = 7,
}

use grk_status::*;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = CString::new(message.replace('\0', " "))
        .unwrap_or_else(|_| CString::new("invalid error message").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = sanitized);
}

fn status_from(error: &Error) -> grk_status {
    set_error(&error.to_string());
    match error {
        Error::Disconnected { .. } => GRK_DISCONNECTED,
        Error::NotIdentifiable { .. } => GRK_NOT_IDENTIFIABLE,
        Error::DegenerateVariance => GRK_DEGENERATE_VARIANCE,
        Error::NoComparisons => GRK_NO_COMPARISONS,
        Error::Io(_) => GRK_INTERNAL_ERROR,
        _ => GRK_INVALID_ARGUMENT,
    }
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread. Never null.
#[no_mangle]
pub extern "C" fn grk_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Opaque comparison collector.
pub struct grk_graph {
    items: usize,
    records: Vec<ComparisonRecord>,
}

/// Opaque fitted model.
pub struct grk_fit {
    inner: MeritFit,
}

/// Creates a comparison collector for `items` items (indices `0..items`).
/// Returns null when `items < 2`. Free with `grk_graph_free`.
#[no_mangle]
pub extern "C" fn grk_graph_new(items: usize) -> *mut grk_graph {
    if items < 2 {
        set_error("at least 2 items are required");
        return std::ptr::null_mut();
    }
    Box::into_raw(Box::new(grk_graph {
        items,
        records: Vec::new(),
    }))
}

/// Records one comparison with outcome oriented `item_i` minus `item_j`.
///
/// # Safety
/// `graph` must be a live handle from [`grk_graph_new`].
#[no_mangle]
pub unsafe extern "C" fn grk_graph_add_comparison(
    graph: *mut grk_graph,
    item_i: usize,
    item_j: usize,
    outcome: f64,
) -> grk_status {
    let Some(graph) = graph.as_mut() else {
        set_error("graph handle is null");
        return GRK_NULL_POINTER;
    };
    if item_i == item_j {
        set_error("an item cannot be compared with itself");
        return GRK_INVALID_ARGUMENT;
    }
    if item_i >= graph.items || item_j >= graph.items {
        set_error("item index out of range");
        return GRK_INVALID_ARGUMENT;
    }
    if !outcome.is_finite() {
        set_error("outcome must be finite");
        return GRK_INVALID_ARGUMENT;
    }
    graph.records.push(ComparisonRecord::new(item_i, item_j, outcome));
    GRK_OK
}

/// Number of items the collector was created with.
///
/// # Safety
/// `graph` must be null or a live handle from [`grk_graph_new`].
#[no_mangle]
pub unsafe extern "C" fn grk_graph_items(graph: *const grk_graph) -> usize {
    graph.as_ref().map_or(0, |g| g.items)
}

/// Number of comparisons recorded so far.
///
/// # Safety
/// `graph` must be null or a live handle from [`grk_graph_new`].
#[no_mangle]
pub unsafe extern "C" fn grk_graph_comparisons(graph: *const grk_graph) -> usize {
    graph.as_ref().map_or(0, |g| g.records.len())
}

/// Releases a collector. Null is ignored.
///
/// # Safety
/// `graph` must be null or a handle from [`grk_graph_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn grk_graph_free(graph: *mut grk_graph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

unsafe fn fit_with(graph: *const grk_graph, constraint: Constraint, out_fit: *mut *mut grk_fit) -> grk_status {
    let Some(graph) = graph.as_ref() else {
        set_error("graph handle is null");
        return GRK_NULL_POINTER;
    };
    if out_fit.is_null() {
        set_error("output pointer is null");
        return GRK_NULL_POINTER;
    }
    let result = catch_unwind(AssertUnwindSafe(|| {
        let g = ComparisonGraph::from_records(&graph.records, graph.items)?;
        fit(&g, &constraint, None)
    }));
    match result {
        Ok(Ok(inner)) => {
            *out_fit = Box::into_raw(Box::new(grk_fit { inner }));
            GRK_OK
        }
        Ok(Err(error)) => status_from(&error),
        Err(_) => {
            set_error("internal panic during fit");
            GRK_INTERNAL_ERROR
        }
    }
}

/// Fits merits under the sum-to-zero constraint.
///
/// # Safety
/// `graph` must be a live handle; `out_fit` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_sum_zero(graph: *const grk_graph, out_fit: *mut *mut grk_fit) -> grk_status {
    fit_with(graph, Constraint::SumZero, out_fit)
}

/// Fits merits with `anchor_item` pinned to merit zero.
///
/// # Safety
/// `graph` must be a live handle; `out_fit` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_anchored(
    graph: *const grk_graph,
    anchor_item: usize,
    out_fit: *mut *mut grk_fit,
) -> grk_status {
    fit_with(graph, Constraint::Anchor { item: anchor_item }, out_fit)
}

/// Number of items behind a fit (the length of the merit vector).
///
/// # Safety
/// `fit` must be null or a live handle from a `grk_fit_*` constructor.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_items(fit: *const grk_fit) -> usize {
    fit.as_ref().map_or(0, |f| f.inner.mu_hat.len())
}

/// Copies the merit vector into `out` (length `len`, which must equal
/// `grk_fit_items`).
///
/// # Safety
/// `fit` must be a live handle; `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_merits(fit: *const grk_fit, out: *mut f64, len: usize) -> grk_status {
    let Some(fit) = fit.as_ref() else {
        set_error("fit handle is null");
        return GRK_NULL_POINTER;
    };
    if out.is_null() {
        set_error("output pointer is null");
        return GRK_NULL_POINTER;
    }
    if len != fit.inner.mu_hat.len() {
        set_error("output length does not match the item count");
        return GRK_INVALID_ARGUMENT;
    }
    let slice = std::slice::from_raw_parts_mut(out, len);
    slice.copy_from_slice(fit.inner.mu_hat.as_slice());
    GRK_OK
}

/// Copies the derived ranks (1 = best; ties share their maximal rank).
///
/// # Safety
/// `fit` must be a live handle; `out` must point to `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_ranks(fit: *const grk_fit, out: *mut u32, len: usize) -> grk_status {
    let Some(fit) = fit.as_ref() else {
        set_error("fit handle is null");
        return GRK_NULL_POINTER;
    };
    if out.is_null() {
        set_error("output pointer is null");
        return GRK_NULL_POINTER;
    }
    if len != fit.inner.ranks.0.len() {
        set_error("output length does not match the item count");
        return GRK_INVALID_ARGUMENT;
    }
    let slice = std::slice::from_raw_parts_mut(out, len);
    for (dst, &rank) in slice.iter_mut().zip(&fit.inner.ranks.0) {
        *dst = rank as u32;
    }
    GRK_OK
}

/// Residual variance estimate of the fit (0 for an exact fit).
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_sigma2(fit: *const grk_fit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.inner.sigma2_hat)
}

/// Algebraic connectivity of the underlying comparison graph.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_lambda2(fit: *const grk_fit) -> f64 {
    fit.as_ref().map_or(f64::NAN, |f| f.inner.diagnostics.lambda2)
}

/// Bottleneck comparison count over spanning trees.
///
/// # Safety
/// `fit` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_bottleneck(fit: *const grk_fit) -> u64 {
    fit.as_ref().map_or(0, |f| f.inner.diagnostics.bottleneck_m)
}

/// Variance of the merit difference `item_i` minus `item_j` (independent of
/// the fit's constraint).
///
/// # Safety
/// `fit` must be a live handle; `out_variance` must be writable.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_pair_variance(
    fit: *const grk_fit,
    item_i: usize,
    item_j: usize,
    out_variance: *mut f64,
) -> grk_status {
    let Some(fit) = fit.as_ref() else {
        set_error("fit handle is null");
        return GRK_NULL_POINTER;
    };
    if out_variance.is_null() {
        set_error("output pointer is null");
        return GRK_NULL_POINTER;
    }
    match pairwise_difference_variance(&fit.inner, item_i, item_j) {
        Ok(value) => {
            *out_variance = value;
            GRK_OK
        }
        Err(error) => status_from(&error),
    }
}

/// Releases a fit. Null is ignored.
///
/// # Safety
/// `fit` must be null or a handle from a `grk_fit_*` constructor not yet freed.
#[no_mangle]
pub unsafe extern "C" fn grk_fit_free(fit: *mut grk_fit) {
    if !fit.is_null() {
        drop(Box::from_raw(fit));
    }
}
