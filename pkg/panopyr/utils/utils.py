import re
from typing import Iterable, List, Tuple


def filter_kwargs(full, ref):
    return {k: v for k, v in full.items() if k in ref}


def parse_size(size: str) -> Tuple[int, int]:
    """Parse an `HxW` size string.

    Args:
        size: Size such as `"128x256"` (height first).

    Returns:
        Tuple[int, int]: `(height, width)`.

    Raises:
        ValueError: If the string is not of the form `HxW` with positive integers.
    """
    match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", size)
    if match is None:
        raise ValueError(f"Size must look like HxW, got {size!r}")
    height, width = int(match.group(1)), int(match.group(2))
    if height < 1 or width < 1:
        raise ValueError(f"Size must be positive, got {size!r}")
    return height, width


def parse_id_list(ids: str) -> List[int]:
    """Parse a comma separated list of integer ids, e.g. `"11,12,13"`."""
    try:
        return sorted({int(i) for i in ids.split(",") if i.strip()})
    except ValueError:
        raise ValueError(f"Expected comma separated integers, got {ids!r}")


def parse_flags(flags: str, allowed: Iterable[str]) -> List[str]:
    """Parse a comma separated flag list against the allowed names.

    Args:
        flags: Flags such as `"sem,cen,off"`.
        allowed: Valid flag names.

    Returns:
        The flags in the order given, duplicates removed.

    Raises:
        ValueError: On an unknown flag.
    """
    allowed = list(allowed)
    parsed = []
    for flag in (f.strip() for f in flags.split(",")):
        if not flag:
            continue
        if flag not in allowed:
            raise ValueError(f"Unknown flag {flag!r}, expected one of {allowed}")
        if flag not in parsed:
            parsed.append(flag)
    return parsed
