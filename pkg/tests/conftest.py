import numpy as np
import pytest

from radimpute.survey import SurveyRecord

# symbolic RPs of the worked example, given concrete coordinates
X1, X5, X8 = (0.0, 0.0), (9.0, 3.0), (16.0, 0.0)


@pytest.fixture
def survey_example():
    """The worked walking-survey table (one path, five APs)."""
    return [
        SurveyRecord(0, "RP", rp=X1),
        SurveyRecord(1, "RSSI", rssi={0: -70, 1: -83, 2: -76}),
        SurveyRecord(3, "RSSI", rssi={0: -71, 2: -78}),
        SurveyRecord(8, "RSSI", rssi={2: -80, 3: -68}),
        SurveyRecord(9, "RP", rp=X5),
        SurveyRecord(12, "RSSI", rssi={0: -74, 4: -80}),
        SurveyRecord(13, "RSSI", rssi={1: -77, 4: -82}),
        SurveyRecord(16, "RP", rp=X8),
    ]


N = np.nan
EXAMPLE_FP = np.array([
    [-70, -83, -76, N, N],
    [-71, N, -78, N, N],
    [N, N, -80, -68, N],
    [-74, -77, N, N, -81],
    [N, N, N, N, N],
])
EXAMPLE_RP = np.array([X1, (N, N), X5, (N, N), X8])
EXAMPLE_T = np.array([1.0, 3.0, 8.0, 12.0, 16.0])


# one line per acceptance criterion, printed after the run
ACCEPTANCE: dict[int, str] = {}


def record(criterion: int, ok: bool, detail: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
