"""IP whitelist, consulted before a single protocol byte is parsed.

An empty whitelist denies every non-local connection; loopback is always
admitted so the desk-scale demo runs with zero configuration.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field


@dataclass
class Whitelist:
    entries: list = field(default_factory=list)
    decisions: list[tuple[str, bool]] = field(default_factory=list)

    def add(self, cidr: str):
        self.entries.append(ipaddress.ip_network(cidr, strict=False))

    def admit(self, remote_address: str) -> bool:
        try:
            addr = ipaddress.ip_address(remote_address)
        except ValueError:
            self.decisions.append((remote_address, False))
            return False
        allowed = addr.is_loopback or any(addr in net for net in self.entries)
        self.decisions.append((remote_address, allowed))
        return allowed

    def config_lines(self) -> list[str]:
        return [f"allow = {net}" for net in self.entries]

    @classmethod
    def from_pairs(cls, pairs: list[tuple[str, str]]) -> "Whitelist":
        wl = cls()
        for k, v in pairs:
            if k == "allow":
                wl.add(v)
        return wl
