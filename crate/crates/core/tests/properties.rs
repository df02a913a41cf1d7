mod common;

use std::collections::BTreeSet;

use common::random_fsm::random_fsm;
use common::*;
use fsmguard::corpus::{sanitize_identifiers, DEFAULT_KEYWORDS};
use fsmguard::encoding::Encoding;
use fsmguard::frontend::{self, emit_verilog, SourceText};
use fsmguard::llm::parse_delimited_code;
use fsmguard::rules::{check_ast, fif_metric, RuleConfig};
use fsmguard::stg::{extract_stg, hamming_distance, reachable_states};
use proptest::prelude::*;

fn enc(v: u64, w: usize) -> Encoding {
    Encoding::from_value(v, w).unwrap()
}

fn bits_of(v: u64, w: usize) -> Vec<u8> {
    (0..w).map(|i| ((v >> (w - 1 - i)) & 1) as u8).collect()
}

fn from_bits(b: &[u8]) -> u64 {
    b.iter().fold(0, |a, x| (a << 1) | *x as u64)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn hd_symmetric_and_triangle(w in 1usize..=16, a in any::<u64>(), b in any::<u64>(), c in any::<u64>()) {
        let m = (1u64 << w) - 1;
        let (a, b, c) = (enc(a & m, w), enc(b & m, w), enc(c & m, w));
        let ab = hamming_distance(&a, &b).unwrap();
        prop_assert_eq!(ab, hamming_distance(&b, &a).unwrap());
        prop_assert_eq!(hamming_distance(&a, &a).unwrap(), 0);
        prop_assert!(ab <= hamming_distance(&a, &c).unwrap() + hamming_distance(&c, &b).unwrap());
    }

    #[test]
    fn fif_closed_form_and_permutation(w in 1usize..=10, x in any::<u64>(), y in any::<u64>(), p in any::<u64>(), perm_seed in any::<u64>()) {
        let m = (1u64 << w) - 1;
        let (x, y, p) = (x & m, y & m, p & m);
        let r = fif_metric(&enc(x, w), &enc(y, w), &enc(p, w)).unwrap();
        // overall is 1 exactly when every bit either flips or is set in both x and p
        let closed = (((x ^ y) | (x & p)) & m) == m;
        prop_assert_eq!(r.overall == 1, closed);
        let mut order: Vec<usize> = (0..w).collect();
        let mut s = perm_seed;
        for i in (1..w).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            order.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffle = |v: u64| {
            let b = bits_of(v, w);
            from_bits(&order.iter().map(|&i| b[i]).collect::<Vec<_>>())
        };
        let q = fif_metric(&enc(shuffle(x), w), &enc(shuffle(y), w), &enc(shuffle(p), w)).unwrap();
        prop_assert_eq!(q.overall, r.overall);
    }

    #[test]
    fn delimited_wrap_identity(payload in "[a-zA-Z0-9 ;_=()\n]{0,80}") {
        let wrapped = format!("prefix [code: {payload}] suffix");
        let got = parse_delimited_code(&wrapped, "[code:", "]").unwrap();
        prop_assert_eq!(got.content, payload.trim());
    }

    #[test]
    fn random_designs_round_trip_and_checks_are_pure(seed in 0u64..5000) {
        let fsm = random_fsm(seed, 8);
        let ast = frontend::parse(&SourceText::new(fsm.text, "r.v")).unwrap();
        let once = emit_verilog(&ast);
        let again = frontend::parse(&once).unwrap();
        prop_assert!(ast.structurally_eq(&again));
        prop_assert_eq!(emit_verilog(&again).content, once.content);
        let cfg = RuleConfig::all();
        let prot = BTreeSet::new();
        let first = check_ast(&ast, &prot, &cfg, "r");
        prop_assert_eq!(first.to_json(), check_ast(&ast, &prot, &cfg, "r").to_json());
        prop_assert_eq!(first.keys(), check_ast(&again, &prot, &cfg, "r").keys());
    }

    #[test]
    fn adding_edges_never_shrinks_reachability(seed in 0u64..5000, from in 0usize..8, to in 0usize..8) {
        let fsm = random_fsm(seed, 8);
        let n = fsm.states;
        let (from, to) = (from % n, to % n);
        let ast = frontend::parse(&SourceText::new(fsm.text.clone(), "r.v")).unwrap();
        let before = reachable_states(&extract_stg(&ast, &BTreeSet::new()).unwrap());
        // prepend an input-guarded exit to the arm of `from`
        let marker = format!("            S{from}: begin\n");
        let text = fsm.text.replacen(&marker, &format!("{marker}                if (in2) next = S{to}; else\n"), 1);
        let ast2 = frontend::parse(&SourceText::new(text, "r.v")).unwrap();
        let after = reachable_states(&extract_stg(&ast2, &BTreeSet::new()).unwrap());
        prop_assert!(before.is_subset(&after));
    }

    #[test]
    fn sanitize_removes_keywords(seed in any::<u64>(), pick in 0usize..4, upper in any::<bool>()) {
        let kw = DEFAULT_KEYWORDS[pick];
        let kw = if upper { kw.to_ascii_uppercase() } else { kw.to_string() };
        let src = fixture("vending.v").content
            .replace("IDLE", &format!("IDLE_{kw}"))
            .replacen("module ", &format!("// {kw} here\nmodule "), 1);
        let ast = frontend::parse(&SourceText::new(src, "v.v")).unwrap();
        let (clean, map) = sanitize_identifiers(&ast, DEFAULT_KEYWORDS, seed).unwrap();
        prop_assert!(!map.is_empty());
        let text = emit_verilog(&clean).content.to_ascii_lowercase();
        for k in DEFAULT_KEYWORDS {
            prop_assert!(!text.contains(k));
        }
    }
}
