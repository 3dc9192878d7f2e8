use std::sync::Arc;

use async_trait::async_trait;
use copilot_core::gateway::ModelResponse;
use copilot_core::gateway::{Gateway, Guardrail, GuardrailPolicy, ScriptedBackend};
use copilot_core::message::Message;
use copilot_core::orchestrator::{
    parse_decision, AgentRegistry, Engine, EngineConfig, FailureKind, GraphState, RegistryError,
    RoutingDecision, RunMode, SupervisorSpec,
};
use copilot_core::runtime::{
    AgentRuntime, AgentSpec, ArgField, ArgType, NormalizedArgs, Tool, ToolContext, ToolError,
    ToolOutput, ToolRegistry, ToolSpec,
};
use copilot_core::trace::TraceEvent;
use proptest::prelude::*;

struct Echo;

#[async_trait]
impl Tool for Echo {
    async fn call(&self, args: &NormalizedArgs, _: &ToolContext) -> Result<ToolOutput, ToolError> {
        Ok(ToolOutput::text(format!(
            "echo:{}",
            args.text("text").unwrap_or("")
        )))
    }
}

fn tools() -> ToolRegistry {
    let mut t = ToolRegistry::new();
    t.register(
        ToolSpec::new("echo", "Echo text").arg(ArgField::new("text", ArgType::String, "text")),
        Arc::new(Echo),
    )
    .unwrap();
    t
}

fn agent(name: &str) -> AgentSpec {
    AgentSpec {
        name: name.into(),
        system_prompt: format!("You are {name}."),
        tool_names: vec!["echo".into()],
        model_binding: "m".into(),
        description: format!("{name} agent"),
        display_name: None,
    }
}

const BASE_RULES: &str = r#"
[[rule]]
caller = "supervisor"
phase = "observation"
respond.text = "{{observation}} [via {{agents_used}}]"

[[rule]]
caller = "supervisor"
any = ["loop"]
respond.text = "HANDOFF: beta"

[[rule]]
caller = "supervisor"
any = ["slow"]
respond = { text = "HANDOFF: alpha", delay_ms = 3000 }

[[rule]]
caller = "supervisor"
any = ["broken"]
respond.error = "backend down"

[[rule]]
caller = "supervisor"
any = ["direct"]
respond.text = "answered directly"

[[rule]]
caller = "supervisor"
respond.text = "HANDOFF: alpha"

[[rule]]
caller = "beta"
respond.tool_calls = [{ tool = "echo", args = { text = "again" } }]

[[rule]]
phase = "observation"
respond.text = "{{agent}} saw {{observation}}"

[[rule]]
respond.tool_calls = [{ tool = "echo", args = { text = "{{task_head}}" } }]
"#;

fn engine_with(names: &[&str], rules: &str, config: EngineConfig) -> Engine {
    let backend = ScriptedBackend::from_toml(rules).unwrap();
    let gateway = Arc::new(
        Gateway::new(Guardrail::new(GuardrailPolicy::default()).unwrap())
            .with_backend("m", Arc::new(backend)),
    );
    let tools = tools();
    let mut reg = AgentRegistry::new();
    for n in names {
        reg.register_agent(agent(n), &tools).unwrap();
    }
    let runtime = AgentRuntime::new(gateway, Arc::new(tools));
    Engine::new(
        reg,
        SupervisorSpec {
            prompt: "Route the request.".into(),
            model: "m".into(),
        },
        runtime,
        config,
    )
}

fn engine() -> Engine {
    engine_with(&["alpha", "beta"], BASE_RULES, EngineConfig::default())
}

fn decisions(trace: &[TraceEvent]) -> Vec<RoutingDecision> {
    trace
        .iter()
        .filter_map(|e| match e {
            TraceEvent::Decision { decision } => Some(decision.clone()),
            _ => None,
        })
        .collect()
}

#[test]
fn registry_errors() {
    let tools = tools();
    let mut reg = AgentRegistry::new();
    reg.register_agent(agent("alpha"), &tools).unwrap();
    assert!(
        matches!(reg.register_agent(agent("alpha"), &tools), Err(RegistryError::DuplicateName(n)) if n == "alpha")
    );
    let mut bad = agent("gamma");
    bad.tool_names = vec!["nope".into()];
    assert!(
        matches!(reg.register_agent(bad, &tools), Err(RegistryError::UnknownTool { tool, .. }) if tool == "nope")
    );
    assert_eq!(reg.len(), 1);
}

#[tokio::test]
async fn single_agent_registry_always_hands_off() {
    let e = engine_with(&["alpha"], BASE_RULES, EngineConfig::default());
    for q in ["anything at all", "tell me about ceria", "42"] {
        let r = e.run_turn("s", q, RunMode::FullCopilot).await.unwrap();
        assert!(
            matches!(&decisions(&r.trace)[0], RoutingDecision::Handoff { target, .. } if target == "alpha")
        );
    }
}

#[tokio::test]
async fn full_turn_trace_order() {
    let r = engine()
        .run_turn("s", "hello there", RunMode::FullCopilot)
        .await
        .unwrap();
    let kinds: Vec<&str> = r
        .trace
        .iter()
        .map(|e| match e {
            TraceEvent::Decision { .. } => "decision",
            TraceEvent::AgentStart { .. } => "start",
            TraceEvent::ModelStep { .. } => "model",
            TraceEvent::ToolStep { .. } => "tool",
            TraceEvent::AgentEnd { .. } => "end",
            TraceEvent::Final { .. } => "final",
        })
        .collect();
    assert_eq!(
        kinds,
        ["decision", "start", "model", "tool", "model", "end", "decision", "final"]
    );
    assert_eq!(
        r.final_message.content,
        "alpha saw echo:hello there [via alpha]"
    );
    assert_eq!(r.summary.agents, ["alpha"]);
    assert_eq!(r.summary.tools, ["echo"]);
    // decision + 2 model steps + 1 tool step + closing decision
    assert_eq!(r.step_count, 5);
}

#[tokio::test]
async fn direct_mode_skips_supervisor() {
    let e = engine();
    let mode = RunMode::DirectTool {
        agent: "beta".into(),
        tool: Some("echo".into()),
    };
    // beta loops on tool calls, so give it a task the observation rule answers
    let e2 = engine_with(
        &["alpha", "beta"],
        &BASE_RULES.replace("caller = \"beta\"", "caller = \"nobody\""),
        EngineConfig::default(),
    );
    let r = e2
        .run_turn("s", "direct please", mode.clone())
        .await
        .unwrap();
    assert_eq!(r.summary.supervisor_decisions, 0);
    assert_eq!(
        r.trace
            .iter()
            .filter(|e| matches!(e, TraceEvent::AgentStart { .. }))
            .count(),
        1
    );
    assert_eq!(r.summary.agents, ["beta"]);

    let bad = RunMode::DirectTool {
        agent: "ghost".into(),
        tool: None,
    };
    let err = e.run_turn("s", "x", bad).await.unwrap_err();
    assert_eq!(err.category, FailureKind::InvalidMode);
    let bad_tool = RunMode::DirectTool {
        agent: "alpha".into(),
        tool: Some("nope".into()),
    };
    assert_eq!(
        e.run_turn("s", "x", bad_tool).await.unwrap_err().category,
        FailureKind::InvalidMode
    );
}

#[tokio::test]
async fn respond_directly_ends_turn() {
    let r = engine()
        .run_turn("s", "direct answer wanted", RunMode::FullCopilot)
        .await
        .unwrap();
    assert_eq!(r.final_message.content, "answered directly");
    assert!(r.summary.agents.is_empty());
}

#[tokio::test]
async fn budget_exhaustion_fails_with_partial_trace_and_no_mutation() {
    for budget in [1usize, 2, 5, 16] {
        let e = engine_with(
            &["alpha", "beta"],
            BASE_RULES,
            EngineConfig {
                step_budget: budget,
                ..EngineConfig::default()
            },
        );
        let err = e
            .run_turn("s", "loop forever", RunMode::FullCopilot)
            .await
            .unwrap_err();
        assert_eq!(err.category, FailureKind::Budget);
        assert!(!err.trace.is_empty());
        // each decision, model step and tool step costs one unit
        let spent = err
            .trace
            .iter()
            .filter(|e| {
                matches!(
                    e,
                    TraceEvent::Decision { .. }
                        | TraceEvent::ModelStep { .. }
                        | TraceEvent::ToolStep { .. }
                )
            })
            .count();
        assert_eq!(spent, budget);
        assert!(e
            .session("s")
            .await
            .is_none_or(|st| st.transcript.is_empty()));
    }
}

#[tokio::test]
async fn timeout_and_backend_failure_are_atomic() {
    let e = engine_with(
        &["alpha"],
        BASE_RULES,
        EngineConfig {
            turn_timeout_secs: 0.2,
            ..EngineConfig::default()
        },
    );
    e.run_turn("s", "first turn", RunMode::FullCopilot)
        .await
        .unwrap();
    let before = e.session("s").await.unwrap();
    // user message, sub-agent answer, final answer
    assert_eq!(before.transcript.len(), 3);

    let err = e
        .run_turn("s", "slow one", RunMode::FullCopilot)
        .await
        .unwrap_err();
    assert_eq!(err.category, FailureKind::Timeout);
    assert_eq!(e.session("s").await.unwrap(), before);

    let err = e
        .run_turn("s", "broken one", RunMode::FullCopilot)
        .await
        .unwrap_err();
    assert_eq!(err.category, FailureKind::Routing);
    assert_eq!(e.session("s").await.unwrap(), before);

    let err = e
        .run_turn("s", "please run subprocess.call", RunMode::FullCopilot)
        .await
        .unwrap_err();
    assert_eq!(err.category, FailureKind::Guardrail);
    assert_eq!(e.session("s").await.unwrap(), before);
}

#[tokio::test]
async fn checkpoint_snapshot_isolation() {
    let e = engine();
    e.run_turn("s", "one", RunMode::FullCopilot).await.unwrap();
    let snap = e.session("s").await.unwrap();
    let token = e.save_checkpoint(&snap);
    e.run_turn("s", "two", RunMode::FullCopilot).await.unwrap();
    assert_eq!(e.session("s").await.unwrap().transcript.len(), 6);
    let restored = e.restore_checkpoint(&token.token).unwrap();
    assert_eq!(restored, snap);
    assert_eq!(restored.transcript.len(), 3);
    assert!(e.restore_checkpoint("garbage").is_err());
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn sessions_run_concurrently_and_turns_serialize() {
    let e = Arc::new(engine());
    let mut handles = Vec::new();
    for s in 0..10 {
        for t in 0..3 {
            let e = e.clone();
            handles.push(tokio::spawn(async move {
                e.run_turn(
                    &format!("s{s}"),
                    &format!("session {s} turn {t}"),
                    RunMode::FullCopilot,
                )
                .await
                .unwrap()
            }));
        }
    }
    for h in handles {
        h.await.unwrap();
    }
    for s in 0..10 {
        let st = e.session(&format!("s{s}")).await.unwrap();
        assert_eq!(st.transcript.len(), 9);
        for turn in st.transcript.chunks(3) {
            let user = &turn[0].content;
            assert!(user.starts_with(&format!("session {s} turn ")));
            // answers directly follow their own question
            assert_eq!(turn[1].content, format!("alpha saw echo:{user}"));
            assert_eq!(
                turn[2].content,
                format!("alpha saw echo:{user} [via alpha]")
            );
        }
    }
}

fn arb_message() -> impl Strategy<Value = Message> {
    (0..3u8, "[a-z ]{0,20}", proptest::option::of("[a-z]{1,8}")).prop_map(|(k, text, origin)| {
        match k {
            0 => Message::user(text),
            1 => {
                let m = Message::assistant(text);
                match origin {
                    Some(o) => m.with_origin(o),
                    None => m,
                }
            }
            _ => Message::system(text),
        }
    })
}

fn arb_state() -> impl Strategy<Value = GraphState> {
    (
        "[a-z0-9-]{1,12}",
        proptest::collection::vec(arb_message(), 0..12),
        proptest::option::of("[a-z]{1,8}"),
        proptest::option::of("[a-z]{1,8}"),
        proptest::option::of(("[a-z]{1,8}", proptest::option::of("[a-z_]{1,8}"))),
        0..32usize,
    )
        .prop_map(
            |(id, transcript, active, pending, direct, steps)| GraphState {
                session_id: id,
                transcript,
                active_agent: active,
                pending_handoff: pending,
                mode: match direct {
                    Some((agent, tool)) => RunMode::DirectTool { agent, tool },
                    None => RunMode::FullCopilot,
                },
                step_count: steps,
            },
        )
}

proptest! {
    #[test]
    fn checkpoint_round_trip(state in arb_state()) {
        let e = engine();
        let a = e.save_checkpoint(&state);
        let b = e.save_checkpoint(&state);
        prop_assert_ne!(&a.token, &b.token);
        prop_assert_eq!(e.restore_checkpoint(&a.token).unwrap(), state.clone());
        prop_assert_eq!(e.restore_checkpoint(&b.token).unwrap(), state);
    }

    #[test]
    fn handoffs_only_name_registered_agents(name in "[a-z_]{1,10}", rest in "[a-z ]{0,20}") {
        let tools = tools();
        let mut reg = AgentRegistry::new();
        reg.register_agent(agent("alpha"), &tools).unwrap();
        reg.register_agent(agent("beta"), &tools).unwrap();
        let d = parse_decision(&ModelResponse::text(format!("HANDOFF: {name} {rest}")), &reg);
        match d.target() {
            Some(t) => prop_assert!(reg.contains(t)),
            None => prop_assert!(name != "alpha" && name != "beta"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn step_count_never_exceeds_budget(budget in 1usize..20, looping in any::<bool>()) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        let e = engine_with(&["alpha", "beta"], BASE_RULES, EngineConfig { step_budget: budget, ..EngineConfig::default() });
        let q = if looping { "loop" } else { "plain" };
        match rt.block_on(e.run_turn("s", q, RunMode::FullCopilot)) {
            Ok(r) => prop_assert!(r.step_count <= budget),
            Err(err) => {
                prop_assert_eq!(err.category, FailureKind::Budget);
                prop_assert!(rt.block_on(e.session("s")).is_none_or(|st| st.transcript.is_empty()));
            }
        }
    }
}
