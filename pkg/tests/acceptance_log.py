"""Shared record of acceptance-criterion outcomes, printed in the terminal summary."""

LINES: list[str] = []
