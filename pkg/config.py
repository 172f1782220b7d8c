import os
from dotenv import load_dotenv

load_dotenv()


def _flag(name, default='false'):
    return os.environ.get(name, default).strip().lower() in ('1', 'true', 'yes', 'on')


class Config:
    # Gruppenkonfiguration
    GROUP_ORDER_CAP = int(os.environ.get('GROUP_ORDER_CAP', 10000))

    # Orakel für die Arens-Eells-Norm (nur Schreibtischgröße)
    ORACLE_SUPPORT_CAP = int(os.environ.get('ORACLE_SUPPORT_CAP', 5))
    ORACLE_POINT_CAP = int(os.environ.get('ORACLE_POINT_CAP', 6))

    # Inverses System
    JOIN_CLOSURE_CAP = int(os.environ.get('JOIN_CLOSURE_CAP', 64))
    SAMPLE_COUNT = int(os.environ.get('SAMPLE_COUNT', 64))
    SAMPLE_SEED = int(os.environ.get('SAMPLE_SEED', 0))

    # Anwendungskonfiguration
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'WARNING')
    REPORT_TIMING = _flag('REPORT_TIMING')
