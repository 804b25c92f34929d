use ctxscope_core::fixtures::{generate, hub_fixture, SyntheticCorpusSpec};
use ctxscope_core::query::{parse_query, query_vector, top_candidates};
use ctxscope_core::{build_index, relate, BuildOptions, Error, RelateOptions, Stopwords};

#[test]
fn hub_is_in_raw_top_but_filtered_by_specificity() {
    for seed in [1, 2, 3, 7, 42] {
        let f = hub_fixture(seed).unwrap();
        let stop = Stopwords::english();
        let parsed = parse_query(&f.query, &f.index, &stop).unwrap();
        let q = query_vector(&parsed, &f.index).unwrap();
        let raw: Vec<_> = top_candidates(&f.index, &q, None, 21)
            .unwrap()
            .into_iter()
            .filter(|c| !parsed.resolved.contains(&c.entity))
            .map(|c| c.entity)
            .collect();
        assert!(raw.contains(&f.hub), "seed {seed}: hub not in raw top 20");

        let net = relate(&f.index, &f.query, &stop, &RelateOptions::default()).unwrap();
        let shown: Vec<&str> = net.nodes.iter().map(|n| n.id.as_str()).collect();
        assert!(!shown.contains(&f.hub.to_string().as_str()), "seed {seed}: hub displayed");
        assert_eq!(net.nodes.len(), 21);
    }
}

#[test]
fn unmixed_topics_separate_in_the_index() {
    let spec = SyntheticCorpusSpec { seed: 5, n_docs: 600, mixing: 0.0, ..Default::default() };
    let corpus = generate(&spec).unwrap();
    let (index, _) = build_index(&corpus, &BuildOptions { dims: 128, ..Default::default() }).unwrap();
    let labelled: Vec<(usize, usize)> = (0..index.len())
        .filter(|&i| index.is_active(i))
        .filter_map(|i| spec.topic_of(index.entity(i)).map(|t| (i, t)))
        .step_by(3)
        .collect();
    let (mut within, mut between) = ((0.0, 0usize), (0.0, 0usize));
    for (a, &(i, ti)) in labelled.iter().enumerate() {
        for &(j, tj) in &labelled[a + 1..] {
            let c = index.cosine_at(i, j);
            let acc = if ti == tj { &mut within } else { &mut between };
            acc.0 += c;
            acc.1 += 1;
        }
    }
    let gap = within.0 / within.1 as f64 - between.0 / between.1 as f64;
    assert!(gap > 0.3, "gap {gap}");
}

#[test]
fn empty_generated_corpus_fails_to_build() {
    let spec = SyntheticCorpusSpec { n_docs: 0, ..Default::default() };
    let corpus = generate(&spec).unwrap();
    assert!(matches!(build_index(&corpus, &BuildOptions::default()), Err(Error::EmptyCorpus)));
}
