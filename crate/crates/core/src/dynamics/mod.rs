//! Geodesics, Jacobi fields and Riccati comparison along the collar.

mod certify;
mod geodesic;
mod jacobi;
mod riccati;

pub use certify::{
    certify_no_conjugate_points, certify_unbounded_growth, run_excursions, CertificateReport, Excursion,
    SampleSpec, TrajectoryRecord, VerifierConfig,
};
pub use geodesic::{
    conformal_jet, geodesic_step, normal_frame, reduced_geodesic, trace_geodesic, ConformalJet, GeodesicState,
};
pub use jacobi::{
    curvature_operator, curvature_operator_along, jacobi_evolve, jacobi_evolve_matrix, jacobi_trace, wronskian_drift,
    CollarFlow, JacobiFrameState, JacobiRun, TraceEvent, TraceEventKind, TraceRun,
};
pub use riccati::{riccati_evolve, RiccatiRun, BLOWDOWN_THRESHOLD};

fn state_row(st: &JacobiFrameState) -> String {
    format!("{:e},{:e},{:e},{:e},{:e},{:e}", st.s, st.t, st.tdot, st.mu, st.det_j, st.norm_j)
}

/// Trajectory dump: `s,t,tdot,mu,det_j,norm_j`.
pub fn trajectory_csv(states: &[JacobiFrameState]) -> String {
    let mut out = String::from("s,t,tdot,mu,det_j,norm_j\n");
    for st in states {
        out.push_str(&state_row(st));
        out.push('\n');
    }
    out
}

/// Trace dump with an `event` column; event rows repeat the localized state.
pub fn trace_csv(run: &TraceRun) -> String {
    let mut out = String::from("s,t,tdot,mu,det_j,norm_j,event\n");
    let mut events = run.events.iter().peekable();
    for st in &run.states {
        while let Some(ev) = events.next_if(|ev| ev.state.s < st.s) {
            out.push_str(&format!("{},{}\n", state_row(&ev.state), ev.kind.label()));
        }
        out.push_str(&state_row(st));
        out.push_str(",\n");
    }
    for ev in events {
        out.push_str(&format!("{},{}\n", state_row(&ev.state), ev.kind.label()));
    }
    out
}
