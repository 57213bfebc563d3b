"""Prompt sets for the controlled experiments."""

CAPITAL_CITIES = (
    "Is London the capital of UK? Yes. Is Moscow the capital of Russia? Yes. "
    "Is Paris the capital of France? Yes. Is Beijing the capital of China? No"
)

COUNTRY_NAMES = [
    "Australia.", "Austria.", "Brazil.",
    "Cuba.", "Denmark.", "Egypt.",
    "France.", "Germany.", "Hungary.",
    "Iceland.", "India.", "Japan.",
    "Norway.", "Poland.", "Spain.",
]

KING_CONTEXT = "He is the king of"
QUEEN_CONTEXT = "She is the queen of"


def country_prompts() -> list[str]:
    """king/queen/empty contexts crossed with the country list: 45 sentences."""
    out = []
    for context in (KING_CONTEXT, QUEEN_CONTEXT, ""):
        for name in COUNTRY_NAMES:
            out.append(f"{context} {name}".strip())
    return out


def country_prompt_group(index: int) -> str:
    """Which context block a country_prompts() index belongs to."""
    return ("king", "queen", "empty")[index // len(COUNTRY_NAMES)]
