"""Quick end-to-end check of the murre_py extension module.

Build it first, e.g. from the repo root:

    cargo build --release -p murre-python --features extension-module
    cp target/release/libmurre_py.so python/murre_py.abi3.so
    python3 python/smoke_test.py
"""

import os
import sys
import tempfile

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import murre_py as m


def main():
    words = ["minä", "olen", "vanha"]
    assert m.encode(words) == "m i n ä _ o l e n _ v a n h a"
    assert m.decode(m.encode(words)) == words
    assert m.chunk(["a", "b", "c", "d"]) == [["a", "b", "c"], ["d"]]

    assert m.align_words(["a", "b", "c"], ["a", "x", "c", "d"]) == {"S": 1, "D": 0, "I": 1, "C": 2}
    assert abs(m.wer(["a", "b", "c"], ["a", "x", "c", "d"]) - 2 / 3) < 1e-12
    assert m.wer([], ["a"]) is None
    assert m.split_sizes(813) == (569, 121, 123)

    rules = "inä / # m _ # -> ie\nun / # k _ # -> o\n"
    assert m.apply_rules("minä", rules) == "mie"
    assert m.apply_rules("kun", rules) == "ko"
    assert m.clean_text("a–b", "–\n") == "ab"

    vocab = ["talo", "talon", "sade", "kadun", "vene", "metsä", "joki", "pidän"]
    corpus = m.generate_corpus(vocab, {"SW": "n / _ # -> ∅\nd -> r\n"}, 60, min_words=1, max_words=4, seed=3)
    assert len(corpus) == 60 and all(d == "SW" for d, _, _ in corpus)

    model, losses = m.Model.train(corpus[:50], corpus[50:], flagged=True, profile="tiny", settings={"steps": "30", "checkpoint_every": "10"})
    assert len(losses) == 30 and all(x == x for x in losses)
    assert model.flagged and model.dialects == ["SW"]

    lines = ["talon sade", "", "kadun vene metsä joki pidän"]
    out = model.adapt(lines, dialect="SW")
    assert [len(l.split()) for l in out] == [len(l.split()) for l in lines]
    assert len(model.adapt(["talo"], dialect="SW", beam=3)[0].split()) == 1

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "model.ckpt")
        model.save(path)
        again = m.Model.load(path)
        assert again.adapt(lines, dialect="SW") == out
        macro, micro = again.evaluate(corpus[50:])
        assert 0.0 <= macro and 0.0 <= micro

    try:
        model.adapt(["talo"], dialect="XX")
    except m.MurreError as e:
        assert "XX" in str(e)
    else:
        raise AssertionError("unknown dialect accepted")

    print("smoke test ok:", model)


if __name__ == "__main__":
    main()
