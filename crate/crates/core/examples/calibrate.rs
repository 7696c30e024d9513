//! Dev probe: finalist profiles under the delivery-rate selection and the
//! on-air time factor. Run:
//!   cargo run -p dms-core --example calibrate --release

use dms_core::optimizer::{select_admission_size, EtaMode, SolverOptions};
use dms_core::scenario::{compile, gen_single_link, IntrinsicSamples, Scenario};
use dms_core::sim::replicate;
use dms_core::soi::UtilityKind;

fn scenario_with(lambda: f64, form: UtilityKind, knobs: (f64, f64, f64, f64)) -> Scenario {
    let (head_drop, slope, span, exponent) = knobs;
    let mut s = gen_single_link(7, lambda);
    s.utility.form = form;
    s.features.intrinsic[1].samples = IntrinsicSamples::HeadSlope {
        top: 100.0,
        head_drop,
        slope,
    };
    s.features.intrinsic[2].samples = IntrinsicSamples::PowerDecay {
        top: 100.0,
        span,
        exponent,
    };
    s
}

fn main() {
    let solver = SolverOptions::default();
    for &hd in &[19.0f64, 19.5, 20.0, 20.3, 20.7] {
        for &sl in &[0.0f64, 3.0, 5.0] {
            for &p in &[2.0f64, 3.0] {
                let knobs = (hd, sl, 80.0, p);
                let sel_l = |lambda: f64, form: UtilityKind| -> (usize, f64) {
                    let mut s = scenario_with(lambda, form, knobs);
                    s.filter.admitted_size = Some(10);
                    let compiled = compile(&s, &solver).unwrap();
                    let sel = select_admission_size(
                        &compiled.links[0].problem,
                        1..=100,
                        EtaMode::Delivery,
                        &solver,
                    )
                    .unwrap();
                    let j1 = sel.curve.iter().find(|q| q.l == 1).unwrap().j_soi;
                    let j2 = sel
                        .curve
                        .iter()
                        .filter(|q| q.l > 1)
                        .map(|q| q.j_soi)
                        .fold(f64::NEG_INFINITY, f64::max);
                    (sel.l_star, (j1 - j2) / j1.abs().max(1e-9))
                };
                let mut eut = Vec::new();
                for &lambda in &[0.1, 0.5, 1.0, 5.0, 10.0] {
                    eut.push(sel_l(lambda, UtilityKind::Eut).0);
                }
                let (l_lut5, margin) = sel_l(5.0, UtilityKind::Lut);
                let l05 = eut[1];
                // Simulated operating point at l*(0.5, EUT).
                let mut sim_s = scenario_with(0.5, UtilityKind::Eut, knobs);
                sim_s.filter.admitted_size = Some(l05);
                let compiled = compile(&sim_s, &solver).unwrap();
                let stats = replicate(&compiled, 11, 100).unwrap();
                let mean = |f: &dyn Fn(&dms_core::sim::LinkStats) -> f64| {
                    stats.iter().map(|r| r.mean_link(f)).sum::<f64>() / stats.len() as f64
                };
                let blocked = mean(&|l| l.blocked_pct);
                let filtered = mean(&|l| l.filtered_pct);
                let trans = mean(&|l| l.transmitted_pct);
                let mono = eut.windows(2).all(|w| w[0] >= w[1]);
                let ok = ((18..=28).contains(&l05) as u8)
                    + ((l_lut5 == 1 && margin > 0.1) as u8)
                    + ((21.78..=27.78).contains(&blocked) as u8)
                    + ((62.68..=68.68).contains(&filtered) as u8)
                    + (mono as u8);
                println!(
                    "hd={hd:<4} sl={sl:<3} p={p:<3} | EUT={eut:?} lut5={l_lut5}({margin:.2}) blk={blocked:5.2} flt={filtered:5.2} tx={trans:5.2} mono={mono} ok={ok}/5"
                );
            }
        }
    }
}
