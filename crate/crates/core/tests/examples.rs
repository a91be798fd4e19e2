// Every example doubles as a smoke test.

macro_rules! example {
    ($name:ident) => {
        mod $name {
            include!(concat!("../examples/", stringify!($name), ".rs"));
            #[test]
            fn runs() {
                main();
            }
        }
    };
}

example!(lifecycle);
example!(validate_model);
example!(rfq_case_study);
example!(worklist);
example!(objectives);
example!(scorecard);
example!(replay_snapshot);
example!(versioning);
