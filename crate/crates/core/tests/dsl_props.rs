use flip_core::dsl::{
    parse_request, DataType, DslError, Endpoint, Expr, Mode, Request, Requirements, SourceRef, DEFAULT_USER,
};
use flip_core::op::OpKind;
use flip_core::topology::id;
use proptest::prelude::*;

fn leaf() -> impl Strategy<Value = SourceRef> {
    prop_oneof![
        (1u64..500).prop_map(|n| SourceRef::Node(id(&format!("bs{n}")))),
        (1u64..500, 1u64..50).prop_map(|(a, k)| SourceRef::Range {
            prefix: "bs".into(),
            from: a,
            to: a + k,
        }),
        "[A-Z][a-z]{2,8}( [A-Z][a-z]{2,6})?".prop_map(SourceRef::Region),
    ]
}

fn op() -> impl Strategy<Value = OpKind> {
    prop::sample::select(OpKind::ALL.to_vec())
}

fn expr() -> impl Strategy<Value = Expr> {
    let base = (op(), prop::collection::vec(leaf().prop_map(Expr::Source), 2..4))
        .prop_map(|(kind, args)| Expr::Op { kind, args });
    base.prop_recursive(3, 24, 4, |inner| {
        (op(), prop::collection::vec(prop_oneof![inner, leaf().prop_map(Expr::Source)], 2..4))
            .prop_map(|(kind, args)| Expr::Op { kind, args })
    })
}

fn ms() -> impl Strategy<Value = f64> {
    prop_oneof![(1u32..100_000).prop_map(f64::from), (1u32..10_000).prop_map(|x| x as f64 / 8.0)]
}

fn requirements() -> impl Strategy<Value = Requirements> {
    (
        prop::option::of(ms()),
        prop::option::of(ms()),
        prop::option::of((0u32..=100).prop_map(|x| x as f64 / 4.0)),
        prop::option::of("[A-Z][a-z]{2,8}"),
        prop::option::of(prop::sample::select(vec![DataType::Scalar, DataType::Vector, DataType::Matrix])),
    )
        .prop_map(|(delay_ms, rate_ms, jitter_ms, coverage, data_type)| Requirements {
            delay_ms,
            rate_ms,
            jitter_ms,
            coverage,
            data_type,
        })
}

fn user() -> impl Strategy<Value = String> {
    prop_oneof![Just(DEFAULT_USER.to_owned()), "[a-z][a-z0-9_]{0,8}", "[a-z]{2,5} [a-z]{2,5}"]
}

fn automated() -> impl Strategy<Value = Request> {
    (expr(), requirements(), user(), prop::sample::select(vec!["user", "cloud", "dest9"])).prop_map(
        |(expr, requirements, user, dest)| Request {
            mode: Mode::Automated,
            expr,
            destination: Endpoint::Node(id(dest)),
            switch: None,
            requirements,
            user,
        },
    )
}

fn manual() -> impl Strategy<Value = Request> {
    let src = prop_oneof![
        leaf(),
        (1u32..20).prop_map(|n| SourceRef::EngineOf(id(&format!("sw{n}")))),
    ];
    (op(), prop::collection::vec(src.prop_map(Expr::Source), 2..5), 1u32..20, any::<bool>()).prop_map(
        |(kind, args, sw, to_engine)| Request {
            mode: Mode::Manual,
            expr: Expr::Op { kind, args },
            destination: if to_engine {
                Endpoint::EngineOf(id(&format!("sw{}", sw % 7 + 1)))
            } else {
                Endpoint::Node(id("user"))
            },
            switch: Some(id(&format!("sw{sw}"))),
            requirements: Requirements::default(),
            user: DEFAULT_USER.to_owned(),
        },
    )
}

proptest! {
    #[test]
    fn automated_round_trip(r in automated()) {
        let text = r.to_string();
        let back = parse_request(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(&back, &r);
        prop_assert_eq!(back.to_string(), text);
    }

    #[test]
    fn manual_round_trip(r in manual()) {
        let text = r.to_string();
        let back = parse_request(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
        prop_assert_eq!(back, r);
    }

    #[test]
    fn arbitrary_input_never_panics(s in "\\PC{0,80}") {
        let _ = parse_request(&s);
    }

    #[test]
    fn syntax_errors_point_inside_the_input(r in automated(), cut in 0usize..200) {
        let text = r.to_string();
        let cut = cut % text.len();
        if let Err(DslError::Syntax { line, col, .. }) = parse_request(&text[..cut]) {
            prop_assert_eq!(line, 1);
            prop_assert!(col >= 1 && col <= cut + 1, "col {} cut {}", col, cut);
        }
    }
}

#[test]
fn unknown_operation_is_reported_with_position() {
    match parse_request("datapath_a(median(bs1:bs4),destination<-user)") {
        Err(DslError::UnknownOperation { name, line, col }) => {
            assert_eq!((name.as_str(), line, col), ("median", 1, 12));
        }
        other => panic!("{other:?}"),
    }
}
