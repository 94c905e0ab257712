import xml.dom.minidom

import numpy as np

from conslab import _parallel, svg
from conslab import spectral as sp


def test_max_workers_env(monkeypatch):
    monkeypatch.setenv("CONSLAB_THREADS", "3")
    assert _parallel.max_workers() == 3
    monkeypatch.setenv("CONSLAB_THREADS", "0")
    assert _parallel.max_workers() == 1


def test_pmap_order_independent_of_threads(monkeypatch):
    results = []
    for threads in ("1", "4"):
        monkeypatch.setenv("CONSLAB_THREADS", threads)
        assert _parallel.pmap(lambda x: x * x, range(20)) == [x * x for x in range(20)]
        rows = sp.eigenratio_scaling(sp.Family("regular", 4), [20, 30], True, seeds=4)
        results.append(sp.scaling_csv(rows))
    assert results[0] == results[1]


def test_svg_well_formed():
    text = svg.line_chart(
        [("a <b>", [0, 1, 2], [1.0, 0.1, 0.01]), ("empty", [], []), ("bad", [0, 1], [np.nan, -1.0])],
        title="t & u",
        logy=True,
    )
    doc = xml.dom.minidom.parseString(text)
    assert doc.documentElement.tagName == "svg"
    assert len(doc.getElementsByTagName("polyline")) == 1


def test_svg_flat_series():
    doc = xml.dom.minidom.parseString(svg.line_chart([("c", [1, 1], [2, 2])]))
    assert doc.getElementsByTagName("polyline")
