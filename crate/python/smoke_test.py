"""Smoke test for the `icon` extension module.

Build and install first:

    pip install --no-build-isolation -e crates/python
    python3 python/smoke_test.py
"""

import json
import os
import tempfile

import icon


def main():
    nb = icon.Notebook.study()
    assert (nb.window_count, nb.cell_count) == (14, 30), nb
    kinds = {c["id"]: c["kind"] for c in nb.cells()}
    assert kinds["c02"] == "Data" and kinds["c06"] == "Visualization", kinds
    assert icon.classify_cell("plt.scatter(df['a'], df['b'])") == "Visualization"

    s = icon.Session(nb, mode="unified")
    events = s.dispatch({"op": "pull_out", "cell": "c02"}, t=1000)
    assert [e["kind"] for e in events] == ["Execute", "PullOut"], events
    assert s.artifact_count == 1

    try:
        s.dispatch({"op": "pull_out", "cell": "c30"}, t=1100)
    except icon.IconError as e:
        code, _message = e.args
        assert code == "WrongCellKind", code
    else:
        raise AssertionError("pull-out of a code cell was accepted")
    assert len(s.log()) == 3

    again = icon.replay(s.log_text(), nb)
    assert again.state_hash() == s.state_hash()

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "session.json")
        s.save(path)
        assert icon.Session.load(path).state_hash() == s.state_hash()

    assert icon.kmeans([[0, 0], [0, 1], [10, 0], [10, 1]], 2) == [0, 0, 1, 1]
    assert sorted(icon.knn_graph([[0.0], [1.0], [3.0]], 1)) == [(0, 1), (1, 0), (2, 1)]

    for mode in ("unified", "separated"):
        out = icon.run_task("instructed", mode)
        report = out["report"]
        assert report["error_score"] == 0, report
        assert out["answers"]["wine_shape"] == [178, 13]
        assert (report["portal_crosses"] == 0) == (mode == "unified"), report
        recomputed = icon.compute_metrics(out["log"], out["ground_truth"])
        assert recomputed == report
        first = json.loads(out["log"].splitlines()[0])
        assert first["kind"] == "SessionStart"

    print("icon smoke test passed")


if __name__ == "__main__":
    main()
