use std::sync::Arc;

use copilot_core::agents::hypothesis::{FALLBACK_LABEL, TOOL_LABEL};
use copilot_core::agents::osti::{FixtureSource, LiveSource, OstiClient, OstiError};
use copilot_core::agents::{
    AnalysisError, AnalysisStatus, DataAnalyst, HypothesisError, HypothesisGenerator, PlanSource,
};
use copilot_core::app::assets_dir;
use copilot_core::data::{Crawler, DataPlane};
use copilot_core::gateway::{Gateway, Guardrail, ScriptedBackend};
use copilot_core::safety::{FilterPolicy, Rejection, Sandbox, SandboxConfig};
use copilot_core::store::get_artifact;
use proptest::prelude::*;

fn fixtures() -> OstiClient {
    OstiClient::new(
        Box::new(FixtureSource::open(assets_dir().join("osti")).unwrap()),
        20,
    )
}

#[tokio::test]
async fn water_gas_shift_fixture() {
    let records = fixtures()
        .search("Look up catalysts for the water-gas shift reaction", 10)
        .await
        .unwrap();
    assert!(!records.is_empty());
    for r in &records {
        assert!(!r.title.is_empty());
    }
    // one record in the recording has a null DOI
    assert!(records.iter().any(|r| r.doi.is_none()));
    assert!(records
        .iter()
        .filter_map(|r| r.doi.as_deref())
        .all(|d| d.starts_with("10.")));
    let abbreviated = fixtures().search("WGS catalysts", 10).await.unwrap();
    assert_eq!(abbreviated, records);
}

#[tokio::test]
async fn no_fixture_hit_is_empty_and_rows_are_checked() {
    let c = fixtures();
    assert!(c.search("medieval poetry", 5).await.unwrap().is_empty());
    assert!(matches!(
        c.search("  ", 5).await,
        Err(OstiError::EmptyQuery)
    ));
    assert!(matches!(
        c.search("catalyst", 0).await,
        Err(OstiError::Rows { .. })
    ));
    assert!(matches!(
        c.search("catalyst", 21).await,
        Err(OstiError::Rows { rows: 21, cap: 20 })
    ));
}

#[tokio::test]
async fn corrupted_fixture_names_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("index.toml"),
        "[[fixture]]\nkeywords = [\"broken\"]\nfile = \"b.json\"\n",
    )
    .unwrap();
    std::fs::write(
        dir.path().join("b.json"),
        r#"[{"title": "fine", "doi": "10.5555/a"}, {"title": "bad doi", "doi": "not-a-doi"}]"#,
    )
    .unwrap();
    let c = OstiClient::new(Box::new(FixtureSource::open(dir.path()).unwrap()), 20);
    match c.search("broken record", 5).await {
        Err(OstiError::Parse { field, .. }) => assert_eq!(field, "[1].doi"),
        other => panic!("{other:?}"),
    }
}

#[tokio::test]
async fn live_source_sends_query_and_rows() {
    use axum::extract::Query;
    use axum::routing::get;
    use std::collections::HashMap;
    let app = axum::Router::new().route(
        "/records",
        get(|Query(q): Query<HashMap<String, String>>| async move {
            let n: usize = q["rows"].parse().unwrap();
            let items: Vec<serde_json::Value> = (0..n + 3)
                .map(|i| serde_json::json!({"title": format!("{} #{i}", q["q"]), "doi": null}))
                .collect();
            axum::Json(items)
        }),
    );
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    let src = LiveSource::new(
        &format!("http://{addr}/records"),
        std::time::Duration::from_secs(5),
    )
    .unwrap();
    let c = OstiClient::new(Box::new(src), 20);
    let r = c.search("ceria gold", 4).await.unwrap();
    assert_eq!(r.len(), 4);
    assert_eq!(r[0].title, "ceria gold #0");

    let dead = LiveSource::new(
        "http://127.0.0.1:9/records",
        std::time::Duration::from_secs(2),
    )
    .unwrap();
    assert!(matches!(
        OstiClient::new(Box::new(dead), 20).search("x", 1).await,
        Err(OstiError::Http(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn result_count_never_exceeds_rows(rows in 1i64..=20, q in prop::sample::select(vec!["water-gas shift", "tio2 pt", "nife", "catalyst", "sinter", "none"])) {
        let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
        let r = rt.block_on(fixtures().search(q, rows)).unwrap();
        prop_assert!(r.len() as i64 <= rows);
    }
}

fn desk_gateway() -> Arc<Gateway> {
    let rules = std::fs::read_to_string(assets_dir().join("scripted_rules.toml")).unwrap();
    Arc::new(Gateway::new(Guardrail::disabled()).with_backend(
        "desk",
        Arc::new(ScriptedBackend::from_toml(&rules).unwrap()),
    ))
}

fn analyst() -> DataAnalyst {
    let data = Arc::new(DataPlane::in_memory());
    let crawler = Crawler::new(assets_dir().join("drop"), data.clone());
    assert_eq!(crawler.tick().len(), 2);
    data.process_index_events();
    let sandbox = Arc::new(Sandbox::new(SandboxConfig::default(), data.objects().clone()).unwrap());
    DataAnalyst::new(
        data,
        desk_gateway(),
        "desk",
        sandbox,
        FilterPolicy::default(),
    )
}

#[tokio::test]
async fn analysis_produces_resolvable_figure() {
    let a = analyst();
    let r = a
        .analyze_dataset("particle diameter growth during aging")
        .await
        .unwrap();
    assert_eq!(r.dataset_id, "pt-alumina-aging-tem");
    assert_eq!(r.file, "particle_sizes.csv");
    assert_eq!(r.status, AnalysisStatus::Executed, "{}", r.stdout);
    assert!(!r.figures.is_empty());
    for f in &r.figures {
        let (bytes, _) = get_artifact(a.sandbox().store().as_ref(), &f.id).unwrap();
        assert_eq!(copilot_core::store::sha256_hex(&bytes), f.sha256);
    }
    assert!(r.stdout.contains("mean_diameter_nm"));
    assert!(r.render().contains(&r.figures[0].link()));
    assert_eq!(a.sandbox().invocations(), 1);
}

#[tokio::test]
async fn no_match_and_empty_query() {
    let a = analyst();
    assert!(matches!(
        a.analyze_dataset("zzqx nonexistent").await,
        Err(AnalysisError::NoMatch(_))
    ));
    assert!(matches!(
        a.analyze_dataset("   ").await,
        Err(AnalysisError::EmptyQuery)
    ));
    assert_eq!(a.sandbox().invocations(), 0);
}

#[tokio::test]
async fn blocked_script_never_reaches_sandbox() {
    let a = analyst();
    let r = a
        .analyze_dataset("aging particle data with environment variables")
        .await
        .unwrap();
    assert_eq!(
        r.status,
        AnalysisStatus::Rejected {
            reason: Rejection::BlockedToken("os".into())
        }
    );
    assert!(r.figures.is_empty());
    assert!(r.render().contains("blocked by the safety filter"));
    assert_eq!(a.sandbox().invocations(), 0);
}

#[tokio::test]
async fn hypothesis_tool_output_is_verbatim() {
    let g = HypothesisGenerator::new(desk_gateway(), "desk");
    let topic = "Ceria promotion of Pt for CO oxidation";
    let out = g.generate(topic).await.unwrap();
    assert_eq!(out.source, PlanSource::Tool);
    let rules = std::fs::read_to_string(assets_dir().join("scripted_rules.toml")).unwrap();
    let canned_start = rules.find("Objectives:\n- Identify").unwrap();
    let canned_end = canned_start + rules[canned_start..].find("\"\"\"").unwrap();
    let expected = rules[canned_start..canned_end].replace("{{task}}", topic);
    assert_eq!(out.raw, expected);
    assert_eq!(out.text, format!("{TOOL_LABEL}{expected}"));
    let plan = out.plan.unwrap();
    assert_eq!(plan.objectives.len(), 3);
    assert!(plan.hypothesis.starts_with("Strengthening"));
}

#[tokio::test]
async fn empty_tool_output_takes_fallback() {
    let g = HypothesisGenerator::new(desk_gateway(), "desk");
    let out = g.generate("a field with no prior work").await.unwrap();
    assert_eq!(out.source, PlanSource::Manual);
    assert!(out.text.starts_with(FALLBACK_LABEL));
    assert!(out.plan.is_some());
    assert!(matches!(
        g.generate(" ").await,
        Err(HypothesisError::EmptyTopic)
    ));
}

#[tokio::test]
async fn fallback_failure_is_an_error() {
    let rules = r#"
[[rule]]
caller = "hypothesis_generator"
respond.error = "tool backend down"

[[rule]]
caller = "hypothesis_fallback"
respond.text = ""

[[rule]]
respond.text = "x"
"#;
    let gw = Arc::new(
        Gateway::new(Guardrail::disabled())
            .with_backend("m", Arc::new(ScriptedBackend::from_toml(rules).unwrap())),
    );
    let g = HypothesisGenerator::new(gw, "m");
    assert!(matches!(
        g.generate("topic").await,
        Err(HypothesisError::Backend { .. })
    ));
}
