use copilot_core::safety::filter::{has_no_imports, tier2_filter, FilterOutcome, FilterPolicy};
use proptest::prelude::*;
use regex::Regex;

fn line() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("import numpy as np".to_string()),
        Just("import pandas as pd, seaborn as sns".to_string()),
        Just("from matplotlib import pyplot as plt".to_string()),
        Just("from pandas import (DataFrame,\n    Series)".to_string()),
        Just("import scipy".to_string()),
        Just("import boto3".to_string()),
        Just("x = 1; import numpy".to_string()),
        Just("if True:\n    import numpy".to_string()),
        Just("y = np.mean([1, 2, 3])".to_string()),
        Just("print(y)".to_string()),
        Just("important = 4".to_string()),
        Just("z = __import__".to_string()),
        Just("plt.plot([1, 2])".to_string()),
        "[a-z]{1,8} = [0-9]{1,3}".prop_map(|s| s),
    ]
}

fn script() -> impl Strategy<Value = String> {
    proptest::collection::vec(line(), 1..10).prop_map(|lines| lines.join("\n") + "\n")
}

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        Just("np".to_string()),
        Just("plt".to_string()),
        Just("print".to_string()),
        "[a-z]{1,4}"
    ]
}

proptest! {
    #[test]
    fn rejection_is_monotone(src in script(), extra in proptest::collection::vec(word(), 0..4)) {
        let base = FilterPolicy::default();
        if matches!(tier2_filter(&src, &base), FilterOutcome::Rejected(_)) {
            let mut wider = base.clone();
            wider.blocked_tokens.extend(extra);
            prop_assert!(matches!(tier2_filter(&src, &wider), FilterOutcome::Rejected(_)));
        }
    }

    #[test]
    fn sanitized_has_no_import_statements(src in script()) {
        if let FilterOutcome::Sanitized(s) = tier2_filter(&src, &FilterPolicy::default()) {
            // independent scan: any line or ;-segment opening with an import keyword
            let re = Regex::new(r"^\s*(import\s|from\s+\S+\s+import\b)").unwrap();
            for l in s.text().lines() {
                for seg in l.split(';') {
                    prop_assert!(!re.is_match(seg), "import left in {:?}", s.text());
                }
            }
            prop_assert!(has_no_imports(s.text()));
        }
    }

    #[test]
    fn refiltering_is_accepted_and_idempotent(src in script()) {
        let policy = FilterPolicy::default();
        if let FilterOutcome::Sanitized(once) = tier2_filter(&src, &policy) {
            match tier2_filter(once.text(), &policy) {
                FilterOutcome::Sanitized(twice) => prop_assert_eq!(twice.text(), once.text()),
                FilterOutcome::Rejected(r) => prop_assert!(false, "re-filter rejected: {r}"),
            }
        }
    }

    #[test]
    fn rejection_iff_token_or_library(src in script()) {
        let policy = FilterPolicy::default();
        let has_token = policy.blocked_tokens.iter().any(|t| src.contains(t.as_str()));
        let bad_lib = src.contains("import scipy") || src.contains("import boto3");
        let rejected = matches!(tier2_filter(&src, &policy), FilterOutcome::Rejected(_));
        prop_assert_eq!(rejected, has_token || bad_lib);
    }
}
