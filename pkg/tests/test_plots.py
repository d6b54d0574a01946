from srsmine import plots
from srsmine.classifier import EvaluationRow
from srsmine.datagen import generate_suite
from srsmine.reducer import reduce
from srsmine.suite import coverage

PNG = b"\x89PNG\r\n\x1a\n"


def render_all(directory, machine):
    suite = generate_suite(machine)
    reduced = reduce(suite, machine, 2)
    paths = [
        plots.coverage_figure([coverage(suite, machine), coverage(reduced, machine)], ["before", "after"],
                              directory / "cov.png"),
        plots.boundary_figure(suite, machine, directory / "bound.png"),
        plots.reduction_figure(len(suite), len(reduced), len(reduced.reduction["repaired"]), directory / "red.png", 2),
        plots.evaluation_figure([EvaluationRow(1, 215, 150), EvaluationRow(2, 259, 106)], directory / "eval.png"),
    ]
    return {p: open(p, "rb").read() for p in map(str, paths)}


def test_figures_written_and_stable(tmp_path, atm):
    (tmp_path / "a").mkdir()
    (tmp_path / "b").mkdir()
    a = render_all(tmp_path / "a", atm)
    b = render_all(tmp_path / "b", atm)
    assert len(a) == 4 and all(v.startswith(PNG) for v in a.values())
    assert list(a.values()) == list(b.values())


def test_figure_directory_created(tmp_path, two_state):
    out = tmp_path / "nested" / "dir" / "b.png"
    plots.boundary_figure(generate_suite(two_state), two_state, out)
    assert out.exists()
