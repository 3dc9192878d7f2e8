use std::sync::Arc;
use std::time::Duration;

use copilot_core::gateway::{Gateway, Guardrail, ScriptedBackend, ScriptedRule};
use copilot_core::App;
use copilot_eval::bench::{extract_answer, parse_questions, BenchmarkQuestion};
use copilot_eval::generate::parse_generated;
use copilot_eval::{
    generate_case_suite, run_benchmark, synthetic_benchmark, test_gen_prompt, ApiClient,
};

async fn serve(app: Arc<App>) -> ApiClient {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    let router = copilot_server::router(app);
    tokio::spawn(async move { axum::serve(listener, router).await.unwrap() });
    ApiClient::new(&format!("http://{addr}"))
}

#[tokio::test]
async fn desk_generates_twenty_literature_cases() {
    let app = App::desk().unwrap();
    let spec = app
        .config
        .agents
        .iter()
        .find(|a| a.name == "researcher")
        .unwrap();
    let cases = generate_case_suite(
        &app.gateway,
        "desk",
        "researcher",
        "Literature Review Agent",
        &spec.system_prompt,
        20,
    )
    .await
    .unwrap();
    assert_eq!(cases.len(), 20);
    assert!(cases
        .iter()
        .all(|c| c.target_agent == "researcher" && c.suite == "generated"));
    assert!(cases
        .iter()
        .any(|c| c.prompt.contains("NiFe layered double hydroxide")));
    assert_eq!(cases[0].id, "researcher-01");
    let none = generate_case_suite(
        &app.gateway,
        "desk",
        "researcher",
        "Literature Review Agent",
        &spec.system_prompt,
        0,
    )
    .await
    .unwrap();
    assert!(none.is_empty());
}

#[tokio::test]
async fn duplicate_generations_are_dropped() {
    let backend = ScriptedBackend::new(vec![ScriptedRule::catch_all(
        "1. Find papers on Pt.\n2. find papers on pt.\n3. Search OSTI for NiFe LDH.\n# comment\n4. \"Search OSTI for NiFe LDH.\"\n5. Look up ceria gold references.",
    )])
    .unwrap();
    let gateway = Gateway::new(Guardrail::disabled()).with_backend("gen", Arc::new(backend));
    let cases = generate_case_suite(
        &gateway,
        "gen",
        "researcher",
        "Literature Review Agent",
        "prompt",
        5,
    )
    .await
    .unwrap();
    let prompts: Vec<&str> = cases.iter().map(|c| c.prompt.as_str()).collect();
    assert_eq!(
        prompts,
        [
            "Find papers on Pt.",
            "Search OSTI for NiFe LDH.",
            "Look up ceria gold references."
        ]
    );
    let err = generate_case_suite(&gateway, "missing", "researcher", "x", "prompt", 3).await;
    assert!(err.is_err());
}

#[test]
fn template_keeps_fixed_text() {
    let p = test_gen_prompt(20, "Literature Review Agent", "You are a researcher.");
    assert!(p.contains("Give me 20 distinct cases to test the agent."));
    assert!(p.ends_with("* Literature Review Agent\nYou are a researcher."));
    assert_eq!(
        parse_generated("Cases:\n- \"Find papers on Ru.\"\n2) Track growth_video.json"),
        ["Find papers on Ru.", "Track growth_video.json"]
    );
}

#[test]
fn answer_extraction_and_file_format() {
    assert_eq!(
        extract_answer("so [ANSWER] b [/ANSWER]").as_deref(),
        Some("b")
    );
    assert_eq!(
        extract_answer("[answer]C[/answer] then [ANSWER]D[/ANSWER]").as_deref(),
        Some("C")
    );
    assert!(extract_answer("no tags").is_none());
    assert!(extract_answer("[ANSWER] [/ANSWER]").is_none());
    let good = r#"{"id":"1","question":"q","answer":"A","topic":"t"}"#;
    assert_eq!(parse_questions(good).unwrap().len(), 1);
    let err = parse_questions(&format!("{good}\n{{\"id\":\"2\",\"question\":\"q\"}}")).unwrap_err();
    assert!(err.to_string().starts_with("line 2"), "{err}");
}

#[test]
fn synthetic_file_shape() {
    let qs = synthetic_benchmark(12, 9);
    assert_eq!(qs.len(), 12);
    assert_eq!(
        qs.iter()
            .filter(|q| q.question.contains("subprocess"))
            .count(),
        3
    );
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn toy_topic_accounting_against_desk() {
    let client = serve(Arc::new(App::desk().unwrap())).await;
    // the desk supervisor always answers A
    let mut qs: Vec<BenchmarkQuestion> = (0..10)
        .map(|i| BenchmarkQuestion {
            id: format!("t{i}"),
            question: format!("Toy question {i}: pick one. A) first B) second"),
            answer: if i < 6 { "A".into() } else { "B".into() },
            topic: "Toy".into(),
        })
        .collect();
    qs.extend(synthetic_benchmark(8, 6).into_iter().map(|mut q| {
        q.topic = "Mixed".into();
        q
    }));
    let report = run_benchmark(&client, &qs, Duration::from_secs(30), 8).await;
    assert!(report.aborted.is_none());
    let toy = report.topic("Toy").unwrap();
    assert_eq!((toy.total, toy.completed, toy.correct), (10, 10, 6));
    assert_eq!(format!("{:.2}", toy.correctness_pct()), "60.00");
    assert_eq!(format!("{:.2}", toy.completion_pct()), "100.00");
    let mixed = report.topic("Mixed").unwrap();
    assert_eq!((mixed.total, mixed.completed, mixed.correct), (8, 6, 6));
    assert_eq!(format!("{:.2}", mixed.completion_pct()), "75.00");
    assert_eq!(report.overall.total, 18);
    assert!(report.to_table().contains("Overall"));
}
