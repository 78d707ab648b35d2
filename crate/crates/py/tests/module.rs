use pyo3::ffi::c_str;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use pyo3::wrap_pymodule;

fn with_module(code: &std::ffi::CStr) {
    Python::attach(|py| {
        let module = wrap_pymodule!(absa_harness::absa_harness)(py);
        let globals = PyDict::new(py);
        globals.set_item("absa", module).unwrap();
        if let Err(e) = py.run(code, Some(&globals), None) {
            e.print(py);
            panic!("python assertion failed");
        }
    });
}

#[test]
fn sample_sentence_through_lexicon() {
    with_module(c_str!(
        r#"
p = absa.Pipeline()
ate, asc = p.backends
assert ate == asc and ate.startswith("lexicon:")
assert p.predict("The price was high, but the restaurant was breathtaking.") == [
    ("price", "negative"), ("restaurant", "positive")]
"#
    ));
}

#[test]
fn corpus_round_trip_and_stats() {
    with_module(c_str!(
        r#"
c = absa.Corpus.sample()
assert len(c) == 1
again = absa.Corpus.from_xml(c.to_xml())
assert again.sentences() == c.sentences()
assert c.validate() == []
assert c.stats()["aspects"] == 2
try:
    absa.Corpus.from_xml("<sentences><sentence>")
    raise AssertionError("parsed broken xml")
except ValueError:
    pass
"#
    ));
}

#[test]
fn metrics_and_comparison() {
    with_module(c_str!(
        r#"
assert absa.prf(1, 2, 1) == (1 / 3, 0.5, 0.4)
assert absa.prf(0, 0, 0) == (0.0, 0.0, 0.0)
assert absa.match_terms(["Food", "food", "wine"], ["food."]) == (1, 0, 2)
assert absa.match_pairs([("food", "positive")], [("food", "negative")]) == (0, 1, 1)
assert len(absa.baselines()) == 17
report = absa.Pipeline().evaluate(absa.Corpus.sample())
assert report["joint"]["f1"] == 1.0
cmp = absa.compare(report, "Res-14")
assert cmp["passed"] and cmp["dataset"] == "Res-14"
"#
    ));
}

#[test]
fn replay_without_fixtures_is_rejected() {
    with_module(c_str!(
        r#"
try:
    absa.Pipeline(ate="replay")
    raise AssertionError("accepted")
except ValueError as e:
    assert "fixtures" in str(e)
try:
    absa.Pipeline(ate="replay", fixtures="/nonexistent/f.jsonl")
    raise AssertionError("accepted")
except absa.BackendError:
    pass
"#
    ));
}
