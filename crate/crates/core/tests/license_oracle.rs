mod common;

use common::{parenthesize, shunting_yard, smaller_expressions, three_id_expressions};
use proptest::prelude::*;
use relforge::license::{
    annotate_source, parse_license_expr, validate_license_expr, LicenseExpr, LicenseId,
    LicenseRegistry,
};

#[test]
fn agrees_with_oracle_on_three_ids() {
    let cases = three_id_expressions();
    assert_eq!(cases.len(), 108);
    for text in cases.iter().chain(&smaller_expressions()) {
        let parsed = parse_license_expr(text).unwrap_or_else(|e| panic!("{text}: {e}"));
        assert_eq!(parenthesize(&parsed), shunting_yard(text), "{text}");
    }
}

#[test]
fn agrees_with_oracle_on_parentheses_and_with() {
    for text in [
        "(MIT OR Apache-2.0) AND BSD-3-Clause",
        "MIT OR (Apache-2.0 AND BSD-3-Clause)",
        "GPL-2.0-or-later WITH Classpath-exception-2.0 OR MIT",
        "MIT AND GPL-2.0+ WITH Classpath-exception-2.0",
        "((MIT))",
    ] {
        assert_eq!(
            parenthesize(&parse_license_expr(text).unwrap()),
            shunting_yard(text),
            "{text}"
        );
    }
}

#[test]
fn rejects_malformed() {
    for bad in [
        "",
        "MIT AND",
        "MIT and Apache-2.0",
        "(MIT",
        "MIT)",
        "MIT OR OR Apache-2.0",
        "(MIT OR Apache-2.0) WITH X",
    ] {
        assert!(parse_license_expr(bad).is_err(), "{bad:?}");
    }
}

#[test]
fn deprecated_id_is_flagged() {
    let registry = LicenseRegistry::bundled();
    let report = validate_license_expr(&parse_license_expr("GPL-2.0 OR MIT").unwrap(), &registry);
    assert!(!report.has_errors());
    assert!(report
        .warnings()
        .any(|f| f.message.contains("GPL-2.0") && f.message.contains("deprecated")));
}

const IDS: [&str; 5] = [
    "MIT",
    "Apache-2.0",
    "BSD-3-Clause",
    "GPL-2.0-only",
    "LicenseRef-Local",
];

fn expr_tree() -> impl Strategy<Value = LicenseExpr> {
    let leaf = prop_oneof![
        (0..IDS.len(), any::<bool>()).prop_map(|(i, plus)| LicenseExpr::Id(LicenseId {
            id: IDS[i].to_string(),
            or_later: plus,
        })),
        (0..IDS.len()).prop_map(|i| LicenseExpr::With {
            license: LicenseId::new(IDS[i]),
            exception: "Classpath-exception-2.0".into(),
        }),
    ];
    leaf.prop_recursive(4, 32, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(l, r)| LicenseExpr::And(Box::new(l), Box::new(r))),
            (inner.clone(), inner).prop_map(|(l, r)| LicenseExpr::Or(Box::new(l), Box::new(r))),
        ]
    })
}

proptest! {
    #[test]
    fn printer_round_trips(expr in expr_tree()) {
        prop_assert!(expr.depth() <= 5);
        let text = expr.to_string();
        prop_assert_eq!(parse_license_expr(&text).unwrap(), expr);
    }

    #[test]
    fn annotation_is_idempotent(expr in expr_tree(), body in "[a-z =\n]{0,40}", shebang in any::<bool>()) {
        let content = if shebang { format!("#!/bin/sh\n{body}") } else { body };
        let once = annotate_source(&content, "#", &expr);
        prop_assert_eq!(annotate_source(&once, "#", &expr), once.clone());
        prop_assert_eq!(once.matches("SPDX-License-Identifier").count(), 1);
        if shebang {
            prop_assert!(once.starts_with("#!/bin/sh\n# SPDX-License-Identifier: "));
        }
    }
}
