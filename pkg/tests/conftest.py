from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


def load_tinymt_fixture(path):
    lines = Path(path).read_text().split("\n")
    header = dict(tok.split("=") for tok in lines[0].lstrip("# ").split())
    params = {"seed": int(header["seed"]), "mat1": int(header["mat1"], 16),
              "mat2": int(header["mat2"], 16), "tmat": int(header["tmat"], 16)}
    words = [int(ln, 16) for ln in lines[1:] if ln.strip()]
    return params, words


@pytest.fixture(params=sorted(FIXTURES.glob("tinymt32_*.txt")), ids=lambda p: p.stem)
def tinymt_vectors(request):
    return load_tinymt_fixture(request.param)


# --- acceptance summary ---------------------------------------------------------

_ACCEPTANCE: dict[int, tuple] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or rep.when != "call":
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    _ACCEPTANCE[number] = (title, "PASS" if rep.passed else "FAIL", detail, rep.duration)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, detail, seconds = _ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number} {verdict}: {title} | {detail} | {seconds:.2f}s")
