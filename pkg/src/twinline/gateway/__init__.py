from .keys import AppKey, KeyStore
from .whitelist import Whitelist
from .bridge import BridgeMap, BridgeEntry, Gateway

__all__ = ["AppKey", "KeyStore", "Whitelist", "BridgeMap", "BridgeEntry", "Gateway"]
