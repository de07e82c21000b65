from robust_qcd.util import calculate_md5_string

# readable on both dark and light terminals
CELL_PALETTE = [
    "dodger_blue1", "spring_green2", "gold1", "orchid", "dark_orange", "turquoise2", "hot_pink",
    "chartreuse3", "medium_purple1", "salmon1", "deep_sky_blue3", "yellow3", "plum2", "sea_green1",
]


def cell_color(name: str) -> str:
    """
    Maps a cell name to a palette color. The same name always gets the same color,
    across threads and runs.
    """
    return CELL_PALETTE[int(calculate_md5_string(name), 16) % len(CELL_PALETTE)]
