use pathseed::neural::{load_checkpoint, save_checkpoint, Checkpoint, RnnLM};
use pathseed::pathcomp::{compress_corpus, decompress, CompressionDictionary};
use pathseed::pdf::{assemble_pdf, extract_objects, is_well_formed};
use pathseed::trace::{ingest_trace_file, BlockId, ExecutionPath, PathCorpus};
use proptest::prelude::*;

/// Flags are a function of the address, as they are for a real target.
fn arb_block() -> impl Strategy<Value = BlockId> {
    (0u32..64).prop_map(|id| BlockId::new(0x400000 + id, id % 5 == 0, id % 3 == 0))
}

fn arb_path() -> impl Strategy<Value = ExecutionPath> {
    proptest::collection::vec(arb_block(), 1..120).prop_map(|mut blocks| {
        blocks.insert(0, BlockId::new(0x400100, true, false));
        ExecutionPath::new(blocks).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_text_round_trip(path in arb_path()) {
        let text = path.to_trace();
        prop_assert!(!text.ends_with("\n\n"));
        let back = ingest_trace_file(text.as_bytes()).unwrap();
        prop_assert_eq!(back.blocks(), path.blocks());
    }

    #[test]
    fn saved_corpus_and_dictionary_reload(paths in proptest::collection::vec(arb_path(), 1..6), max_len in 4usize..40) {
        let mut corpus = PathCorpus::new();
        for (i, p) in paths.into_iter().enumerate() {
            corpus.add(p.with_source(format!("s{i}")));
        }
        let dir = tempfile::tempdir().unwrap();
        corpus.save_dir(dir.path()).unwrap();
        let loaded = PathCorpus::load_dir(dir.path()).unwrap();
        prop_assert_eq!(loaded.len(), corpus.len());

        let (compressed, dict) = compress_corpus(&corpus, max_len).unwrap();
        let reparsed = CompressionDictionary::from_text(&dict.to_text(), max_len, |id| loaded.universe_lookup(id)).unwrap();
        for (c, p) in compressed.iter().zip(corpus.paths()) {
            let back = decompress(c, &reparsed).unwrap();
            prop_assert_eq!(back.blocks(), p.blocks());
        }
    }

    #[test]
    fn assembled_strings_survive(texts in proptest::collection::vec("[a-z ()\\\\]{0,24}", 1..5)) {
        // Literal strings with escaped parentheses so every body stays balanced.
        let bodies: Vec<String> = texts
            .iter()
            .map(|t| format!("({})", t.replace('\\', "\\\\").replace('(', "\\(").replace(')', "\\)")))
            .collect();
        let pdf = assemble_pdf(&bodies, 0).unwrap();
        prop_assert!(is_well_formed(&pdf).ok);
        let back: Vec<Vec<u8>> = extract_objects(&pdf).objects.into_iter().map(|o| o.body).collect();
        prop_assert_eq!(back, bodies.iter().map(|b| b.as_bytes().to_vec()).collect::<Vec<_>>());
    }

    #[test]
    fn extraction_is_total(bytes in proptest::collection::vec(any::<u8>(), 0..400)) {
        let ex = extract_objects(&bytes);
        prop_assert!(ex.objects.iter().all(|o| o.offset < bytes.len()));
        let _ = is_well_formed(&bytes);
    }
}

#[test]
fn conflicting_flags_are_rejected() {
    let a = ExecutionPath::new(vec![BlockId::new(1, true, false), BlockId::new(2, false, true)]).unwrap();
    let b = ExecutionPath::new(vec![BlockId::new(1, true, false), BlockId::new(2, false, false)]).unwrap();
    let mut corpus = PathCorpus::new();
    assert!(corpus.try_add(a).unwrap());
    assert_eq!(corpus.try_add(b).unwrap_err().to_string(), "block 00000002 seen with flag X and -");
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let model = RnnLM::new(7, 6, 11);
    let bytes = save_checkpoint(&Checkpoint::Lm(model.clone()));
    match load_checkpoint(&bytes).unwrap() {
        Checkpoint::Lm(back) => assert_eq!(back, model),
        _ => panic!("wrong model kind"),
    }
    assert!(load_checkpoint(&bytes[..bytes.len() - 1]).is_err());
}
