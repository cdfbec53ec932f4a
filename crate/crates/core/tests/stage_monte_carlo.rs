//! Stage diagnostics over 500 supercritical runs at n = 10⁶, p = 2·10⁻⁵,
//! r = 2, a = a_c + 4⌈√a_c⌉. Takes a few minutes.

use std::sync::OnceLock;

use bootperc::montecarlo::*;
use bootperc::thresholds::*;

fn summary() -> &'static ExperimentSummary {
    static CELL: OnceLock<ExperimentSummary> = OnceLock::new();
    CELL.get_or_init(|| {
        let params = ProcessParams::new(1_000_000, 2e-5, 2).unwrap();
        let mut cfg = ExperimentConfig::new(params, SeedSize::Offset(4.0), 500, 20_251);
        cfg.stage_diagnostics = true;
        run_experiment(&cfg).unwrap()
    })
}

#[test]
fn early_growth_frequency_respects_bound() {
    let s = summary();
    let st = s.stages.as_ref().unwrap();
    let r = 2.0;
    let alpha = s.alpha;
    let t0 = s.critical.t0;
    let bound = 1.0 - (-r * alpha * alpha / (8.0 * (t0 + r * alpha / 3.0))).exp();
    println!("early_ok {:?} vs bound {bound}", st.early_ok);
    assert!(st.early_ok.wilson_hi >= bound);
}

#[test]
fn median_qualified_set_reaches_prediction() {
    let st = summary().stages.as_ref().unwrap();
    let median = st.size_Bhat.unwrap().median;
    println!("median |B̂| = {median}, predicted {}", st.pred_Bhat);
    assert!(median >= st.pred_Bhat);
}

/// Fails at this scale: |C| falls far short of its asymptotic size, so D
/// stays small. See the README section on stage diagnostics.
#[test]
#[ignore = "asymptotic C/D sizes are out of reach at n = 10^6"]
fn median_d_fraction_given_bridge() {
    let st = summary().stages.as_ref().unwrap();
    let q = st.frac_D_given_bridge.expect("some runs bridge");
    println!(
        "median |D|/n given bridge = {}, |C| median {} vs pred {}",
        q.median,
        st.size_C.unwrap().median,
        st.pred_C
    );
    assert!(q.median >= 0.9);
}
