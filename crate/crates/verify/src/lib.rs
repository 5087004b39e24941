//! Holds the `acceptance` test target, which exercises `olnl-core` and the
//! `olnl` harness together. It is a separate package so that it runs after
//! the unit and integration suites of both.
