use std::sync::Arc;
use std::time::Duration;

use copilot_core::safety::{
    tier2_filter, FailureCategory, FilterPolicy, InputFile, Sandbox, SandboxConfig, SandboxLimits,
    SanitizedScript,
};
use copilot_core::store::{MemoryObjectStore, ObjectStore};

fn sanitize(src: &str) -> SanitizedScript {
    tier2_filter(src, &FilterPolicy::default())
        .sanitized()
        .cloned()
        .unwrap_or_else(|| panic!("filter rejected {src:?}"))
}

fn sandbox() -> (Sandbox, Arc<MemoryObjectStore>) {
    let store = Arc::new(MemoryObjectStore::new());
    let sb = Sandbox::new(SandboxConfig::default(), store.clone()).unwrap();
    (sb, store)
}

#[tokio::test]
async fn one_figure_one_artifact() {
    let (sb, store) = sandbox();
    let script = sanitize(
        "import matplotlib.pyplot as plt\nimport numpy as np\nx = np.linspace(0, 1, 20)\nplt.plot(x, x ** 2)\nplt.savefig('curve.png')\nprint('done')\n",
    );
    let out = sb.execute(&script, &[]).await;
    assert!(out.succeeded(), "{out:?}");
    assert_eq!(out.figures.len(), 1);
    assert_eq!(out.figures[0].name, "curve.png");
    assert!(store.exists(&out.figures[0].key()));
    assert_eq!(out.stdout.trim(), "done");
}

#[tokio::test]
async fn input_files_are_staged() {
    let (sb, _) = sandbox();
    let script = sanitize("import pandas as pd\ndf = pd.read_csv('sizes.csv')\nprint(df['d'].mean())\ndf.describe().to_csv('summary.csv')\n");
    let input = InputFile {
        name: "sizes.csv".into(),
        bytes: b"d\n2.0\n4.0\n".to_vec(),
    };
    let out = sb.execute(&script, &[input]).await;
    assert!(out.succeeded(), "{out:?}");
    assert_eq!(out.stdout.trim(), "3.0");
    assert_eq!(out.tables.len(), 1);
    assert_eq!(out.tables[0].name, "summary.csv");
}

#[tokio::test]
async fn wall_time_cap() {
    let store = Arc::new(MemoryObjectStore::new());
    let config = SandboxConfig {
        limits: SandboxLimits {
            wall_secs: 1.5,
            ..SandboxLimits::default()
        },
        ..SandboxConfig::default()
    };
    let sb = Sandbox::new(config, store).unwrap();
    let out = sb.execute(&sanitize("while True:\n    pass\n"), &[]).await;
    assert_eq!(out.failure_category(), Some(FailureCategory::Timeout));
    assert!(out.usage.wall_ms < 10_000);
}

#[tokio::test]
async fn network_attempt_is_isolation_failure_and_sends_nothing() {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let port = listener.local_addr().unwrap().port();
    let (sb, _) = sandbox();
    let script = sanitize(&format!(
        "import pandas as pd\ndf = pd.read_csv('http://127.0.0.1:{port}/data.csv')\nprint(df)\n"
    ));
    let out = sb.execute(&script, &[]).await;
    assert_eq!(
        out.failure_category(),
        Some(FailureCategory::Isolation),
        "{out:?}"
    );
    let accepted = tokio::time::timeout(Duration::from_millis(300), listener.accept()).await;
    assert!(accepted.is_err(), "the listener saw a connection");
}

#[tokio::test]
async fn reading_outside_scratch_is_isolation_failure() {
    let (sb, _) = sandbox();
    let out = sb
        .execute(
            &sanitize("with open('/etc/passwd') as fh:\n    print(fh.read())\n"),
            &[],
        )
        .await;
    assert_eq!(
        out.failure_category(),
        Some(FailureCategory::Isolation),
        "{out:?}"
    );
    assert!(!out.stdout.contains("root:"));
}

#[tokio::test]
async fn writing_outside_scratch_is_isolation_failure() {
    let (sb, _) = sandbox();
    let out = sb
        .execute(
            &sanitize("import pandas as pd\npd.DataFrame({'a': [1]}).to_csv('/tmp/leak.csv')\n"),
            &[],
        )
        .await;
    assert_eq!(
        out.failure_category(),
        Some(FailureCategory::Isolation),
        "{out:?}"
    );
}

#[tokio::test]
async fn runtime_exception_captured() {
    let (sb, _) = sandbox();
    let out = sb.execute(&sanitize("print('before')\n1 / 0\n"), &[]).await;
    assert_eq!(out.failure_category(), Some(FailureCategory::Runtime));
    assert!(out.stderr.contains("ZeroDivisionError"));
    assert_eq!(out.stdout.trim(), "before");
    assert!(out.figures.is_empty());
}

#[tokio::test]
async fn memory_cap() {
    let (sb, _) = sandbox();
    let out = sb
        .execute(
            &sanitize("import numpy as np\nx = np.ones(10 ** 10)\nprint(x.sum())\n"),
            &[],
        )
        .await;
    assert_eq!(
        out.failure_category(),
        Some(FailureCategory::Memory),
        "{out:?}"
    );
}

#[tokio::test]
async fn output_cap() {
    let store = Arc::new(MemoryObjectStore::new());
    let config = SandboxConfig {
        limits: SandboxLimits {
            output_kb: 4,
            ..SandboxLimits::default()
        },
        ..SandboxConfig::default()
    };
    let sb = Sandbox::new(config, store).unwrap();
    let out = sb
        .execute(&sanitize("for i in range(100000):\n    print(i)\n"), &[])
        .await;
    assert_eq!(out.failure_category(), Some(FailureCategory::Output));
    assert!(out.stdout.len() <= 4096);
}

#[tokio::test]
async fn figures_stay_in_scratch_under_concurrency() {
    let (sb, _) = sandbox();
    let sb = Arc::new(sb);
    let mut handles = Vec::new();
    for i in 0..4 {
        let sb = sb.clone();
        handles.push(tokio::spawn(async move {
            let script = sanitize(&format!(
                "import matplotlib.pyplot as plt\nplt.plot([0, {i}])\nplt.savefig('sub/../fig{i}.png') if False else plt.savefig('fig{i}.png')\n"
            ));
            sb.execute(&script, &[]).await
        }));
    }
    for h in handles {
        let out = h.await.unwrap();
        assert!(out.succeeded(), "{out:?}");
        assert_eq!(out.figures.len(), 1);
        assert!(!out.figures[0].name.contains(".."));
        assert!(!out.figures[0].name.starts_with('/'));
    }
}

#[test]
fn zero_limits_rejected() {
    let config = SandboxConfig {
        limits: SandboxLimits {
            wall_secs: 0.0,
            ..SandboxLimits::default()
        },
        ..SandboxConfig::default()
    };
    assert!(Sandbox::new(config, Arc::new(MemoryObjectStore::new())).is_err());
}
