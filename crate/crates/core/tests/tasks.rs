use icon_core::metrics::tasks::{run_task, TaskKind};
use icon_core::metrics::{replay, write_log, parse_log};
use icon_core::metrics::tasks::study_notebook;
use icon_core::workspace::{EngineConfig, EventKind, Mode};

fn config() -> EngineConfig {
    EngineConfig::default()
}

#[test]
fn tasks_complete_in_both_modes() {
    for kind in [TaskKind::Instructed, TaskKind::Exploratory] {
        for mode in [Mode::Unified, Mode::Separated] {
            let out = run_task(kind, mode, config()).unwrap_or_else(|e| panic!("{kind:?}/{mode:?}: {e}"));
            println!("{kind:?} {mode:?} answers={:?} truth={:?}\n{}", out.answers, out.ground_truth, out.report.to_text());
            assert_eq!(out.report.error_score, 0, "{kind:?} {mode:?}");
            out.final_state.check_invariants().unwrap();
            let crosses = out.log.iter().filter(|e| matches!(e.kind, EventKind::PortalCross { .. })).count();
            match mode {
                Mode::Unified => assert_eq!(crosses, 0),
                Mode::Separated => assert!(crosses > 0),
            }
        }
    }
}

#[test]
fn task_logs_replay_to_same_hash() {
    for kind in [TaskKind::Instructed, TaskKind::Exploratory] {
        for mode in [Mode::Unified, Mode::Separated] {
            let out = run_task(kind, mode, config()).unwrap();
            let text = write_log(&out.log);
            let log = parse_log(&text).unwrap();
            let session = replay(&log, &study_notebook()).unwrap();
            assert_eq!(session.state_hash(), out.state_hash, "{kind:?} {mode:?}");
        }
    }
}
