use std::time::Duration;

use copilot_core::agents::hypothesis::TOOL_LABEL;
use copilot_core::jobs::JobState;
use copilot_core::orchestrator::{RoutingDecision, RunMode};
use copilot_core::store::get_artifact;
use copilot_core::trace::TraceEvent;
use copilot_core::{App, CopilotConfig};
use regex::Regex;

fn desk() -> App {
    App::desk().expect("desk config builds")
}

fn job_id(text: &str) -> String {
    let re = Regex::new(r"job-[0-9a-f]{32}").unwrap();
    re.find(text)
        .unwrap_or_else(|| panic!("no job id in {text:?}"))
        .as_str()
        .to_string()
}

#[tokio::test]
async fn desk_registers_six_agents_and_ingests_drop_folder() {
    let app = desk();
    let names: Vec<&str> = app
        .engine
        .registry()
        .agents()
        .iter()
        .map(|a| a.name.as_str())
        .collect();
    assert_eq!(
        names,
        [
            "researcher",
            "analyzer",
            "hypothesizer",
            "simulation",
            "segmenter",
            "uq"
        ]
    );
    assert_eq!(app.data.records().len(), 2);
    let inputs = app.store.list("inputs/").unwrap();
    let keys: Vec<&str> = inputs.iter().map(|o| o.key.as_str()).collect();
    assert_eq!(
        keys,
        [
            "inputs/growth_video.json",
            "inputs/pt_micrograph.json",
            "inputs/tos_training.csv"
        ]
    );
}

#[tokio::test]
async fn literature_turn_routes_supervisor_researcher_osti() {
    let app = desk();
    let r = app
        .engine
        .run_turn(
            "s1",
            "Find recent articles on TiO2-supported Pt catalysts for CO oxidation",
            RunMode::FullCopilot,
        )
        .await
        .unwrap();
    assert!(
        matches!(&r.trace[0], TraceEvent::Decision { decision: RoutingDecision::Handoff { target, .. } } if target == "researcher")
    );
    assert_eq!(r.summary.agents, ["researcher"]);
    assert_eq!(r.summary.tools, ["osti_search"]);
    assert!(r.final_message.content.contains("10.5555/osti.co.0101"));
    assert!(r
        .final_message
        .content
        .contains("Sub-agents utilized: researcher"));
}

#[tokio::test]
async fn ambiguous_tracking_prompt_goes_to_analyzer() {
    let app = desk();
    let r = app
        .engine
        .run_turn(
            "s1",
            "Give me statistical analysis of particle sizes and their changes over time from my tracking results.",
            RunMode::FullCopilot,
        )
        .await
        .unwrap();
    assert_eq!(r.summary.agents, ["analyzer"]);
}

#[tokio::test]
async fn direct_hypothesis_is_verbatim() {
    let app = desk();
    let mode = RunMode::DirectTool {
        agent: "hypothesizer".into(),
        tool: None,
    };
    let r = app
        .engine
        .run_turn("s1", "Ceria promotion of Pt for CO oxidation", mode)
        .await
        .unwrap();
    assert_eq!(r.summary.supervisor_decisions, 0);
    assert_eq!(r.summary.agents, ["hypothesizer"]);
    let tool_text = r
        .trace
        .iter()
        .find_map(|e| match e {
            TraceEvent::ToolStep { observation, .. } => Some(observation.payload.clone()),
            _ => None,
        })
        .unwrap();
    assert!(tool_text.starts_with(TOOL_LABEL));
    assert!(r.final_message.content.contains(&tool_text));
    assert!(tool_text.contains("Hypothesis:\nStrengthening the metal-support interaction"));
}

#[tokio::test]
async fn analysis_turn_returns_resolvable_figure() {
    let app = desk();
    let r = app
        .engine
        .run_turn(
            "s1",
            "Plot the particle diameter growth during aging",
            RunMode::FullCopilot,
        )
        .await
        .unwrap();
    assert_eq!(r.summary.tools, ["analyze_dataset"]);
    let link = Regex::new(r"/artifacts/([0-9a-f]{32}\.png)").unwrap();
    let id = link
        .captures(&r.final_message.content)
        .unwrap_or_else(|| panic!("no figure link in {}", r.final_message.content))[1]
        .to_string();
    let (bytes, ct) = get_artifact(app.store.as_ref(), &id).unwrap();
    assert_eq!(ct, "image/png");
    assert!(bytes.starts_with(b"\x89PNG"));
}

#[tokio::test]
async fn simulation_segmentation_and_uq_jobs_finish() {
    let app = desk();
    for (prompt, agent, tool) in [
        (
            "Simulate sintering of the Pt catalyst at 650 C",
            "simulation",
            "submit_simulation_job",
        ),
        (
            "Segment the particles in pt_micrograph.json",
            "segmenter",
            "submit_image_segmentation_job",
        ),
        (
            "Track the particles through growth_video.json",
            "segmenter",
            "submit_video_tracking_job",
        ),
        (
            "Which next experiments reduce uncertainty in tos_training.csv?",
            "uq",
            "submit_uncertainty_job",
        ),
    ] {
        let r = app
            .engine
            .run_turn("jobs", prompt, RunMode::FullCopilot)
            .await
            .unwrap();
        assert_eq!(r.summary.agents, [agent], "{prompt}");
        assert_eq!(r.summary.tools, [tool], "{prompt}");
        let id = job_id(&r.final_message.content);
        let rec = app
            .scheduler
            .wait_for(&id, Duration::from_secs(60))
            .await
            .unwrap();
        assert_eq!(
            rec.state,
            JobState::Succeeded,
            "{prompt}: {:?}",
            rec.failure_log
        );
    }
    assert_eq!(app.scheduler.list_jobs("jobs").len(), 4);
}

#[test]
fn config_rejects_unknown_backend_reference() {
    let text =
        std::fs::read_to_string(copilot_core::app::assets_dir().join("config.toml")).unwrap();
    let broken = text.replace(
        "[tool_models]\nanalysis = \"desk\"",
        "[tool_models]\nanalysis = \"nowhere\"",
    );
    let err = CopilotConfig::parse(&broken).unwrap_err();
    assert!(err.to_string().contains("nowhere"), "{err}");
    assert!(CopilotConfig::parse(&text).is_ok());
}
