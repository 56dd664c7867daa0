"""Parser and resolver for the service descriptors held in surrogate objects.

Behavior definitions carry an abstract descriptor (messages + portType);
behavior mechanisms carry the same abstract section plus a binding with
HTTP verbs and URL templates and a service/port with the base address.
Anything outside this WSDL subset is rejected loudly. The dialect is
documented with full examples in ``docs/service-descriptors.md``.

URL templates name their inputs as ``(KEY)`` placeholders. Datastream
binding keys are substituted verbatim (their values are repository-issued
URLs); user parameters are percent-encoded.
"""

from __future__ import annotations

import re
import urllib.parse
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

from .errors import DescriptorError, MissingBindingKey, MissingRequiredParam
from .model import BINDING_KEY_RE, Pid
from .xmlout import Emitter

DESCRIPTOR_NS = "urn:objectrepo:service-desc:1"

METHOD_NAME_RE = re.compile(r"^[A-Za-z][A-Za-z0-9_]*$")
PLACEHOLDER_RE = re.compile(r"\(([A-Z][A-Z0-9_]*)\)")

HTTP_VERBS = ("GET", "POST")


@dataclass(frozen=True)
class UserParam:
    name: str
    required: bool = True
    default: str = ""


@dataclass(frozen=True)
class MethodDef:
    name: str
    binding_keys: tuple[str, ...] = ()
    user_params: tuple[UserParam, ...] = ()

    def param(self, name: str) -> UserParam | None:
        for param in self.user_params:
            if param.name == name:
                return param
        return None


@dataclass(frozen=True)
class MethodMap:
    methods: dict[str, MethodDef] = field(default_factory=dict)


@dataclass(frozen=True)
class Binding:
    method: str
    verb: str
    url_template: str
    expected_mime: str
    binding_keys: tuple[str, ...] = ()
    param_names: tuple[str, ...] = ()


@dataclass(frozen=True)
class ServiceBindings:
    implements_bdef: Pid
    bindings: dict[str, Binding] = field(default_factory=dict)


@dataclass(frozen=True)
class ConcreteRequest:
    verb: str
    url: str
    expected_mime: str


def _tag(element: ET.Element) -> str:
    if element.tag.startswith("{%s}" % DESCRIPTOR_NS):
        return element.tag[len(DESCRIPTOR_NS) + 2:]
    return element.tag


def _parse_root(data: bytes) -> ET.Element:
    try:
        root = ET.fromstring(data)
    except ET.ParseError as exc:
        raise DescriptorError(f"not well-formed XML: {exc}") from exc
    if _tag(root) != "definitions":
        raise DescriptorError(
            f"unsupported construct: root element {root.tag!r} "
            f"(expected definitions in {DESCRIPTOR_NS})")
    return root


def _parse_abstract(root: ET.Element) -> MethodMap:
    messages: dict[str, tuple[tuple[str, ...], tuple[UserParam, ...]]] = {}
    port_types: list[ET.Element] = []
    for child in root:
        tag = _tag(child)
        if tag == "message":
            name = child.get("name")
            if not name:
                raise DescriptorError("message without a name")
            if name in messages:
                raise DescriptorError(f"duplicate message {name!r}")
            keys: list[str] = []
            params: list[UserParam] = []
            for part in child:
                if _tag(part) != "part":
                    raise DescriptorError(
                        f"unsupported construct {_tag(part)!r}",
                        f"message {name}")
                part_name = part.get("name", "")
                if not BINDING_KEY_RE.match(part_name):
                    raise DescriptorError(
                        f"part name {part_name!r} must be an uppercase token",
                        f"message {name}")
                if part_name in keys or any(p.name == part_name for p in params):
                    raise DescriptorError(
                        f"duplicate part {part_name!r}", f"message {name}")
                kind = part.get("kind")
                if kind == "datastream":
                    if part.get("required") or part.get("default"):
                        raise DescriptorError(
                            "datastream parts take no required/default",
                            f"message {name}/part {part_name}")
                    keys.append(part_name)
                elif kind == "parameter":
                    required = part.get("required", "false")
                    if required not in ("true", "false"):
                        raise DescriptorError(
                            f"required must be true or false, got {required!r}",
                            f"message {name}/part {part_name}")
                    params.append(UserParam(
                        name=part_name,
                        required=required == "true",
                        default=part.get("default", ""),
                    ))
                else:
                    raise DescriptorError(
                        f"part kind must be datastream or parameter, "
                        f"got {kind!r}", f"message {name}/part {part_name}")
            messages[name] = (tuple(keys), tuple(params))
        elif tag == "portType":
            port_types.append(child)
        elif tag in ("binding", "service"):
            pass  # concrete side, handled by parse_bindings
        else:
            raise DescriptorError(f"unsupported construct: {tag!r}")

    if len(port_types) != 1:
        raise DescriptorError(
            f"exactly one portType required, found {len(port_types)}")
    methods: dict[str, MethodDef] = {}
    for operation in port_types[0]:
        if _tag(operation) != "operation":
            raise DescriptorError(
                f"unsupported construct {_tag(operation)!r}", "portType")
        name = operation.get("name", "")
        if not METHOD_NAME_RE.match(name):
            raise DescriptorError(f"bad operation name {name!r}", "portType")
        if name in methods:
            raise DescriptorError(f"duplicate operation {name!r}", "portType")
        message_ref = operation.get("message", "")
        if message_ref not in messages:
            raise DescriptorError(
                f"operation {name} references unknown message {message_ref!r}",
                "portType")
        keys, params = messages[message_ref]
        methods[name] = MethodDef(name=name, binding_keys=keys,
                                  user_params=params)
    if not methods:
        raise DescriptorError("a behavior definition must declare at least "
                              "one method")
    return MethodMap(methods=methods)


def parse_method_map(data: bytes) -> MethodMap:
    """Parse the abstract method set out of a METHODMAP descriptor."""
    return _parse_abstract(_parse_root(data))


def parse_bindings(data: bytes) -> ServiceBindings:
    """Parse a SERVICEBINDINGS descriptor into dispatchable bindings."""
    root = _parse_root(data)
    method_map = _parse_abstract(root)

    binding_elements = [c for c in root if _tag(c) == "binding"]
    service_elements = [c for c in root if _tag(c) == "service"]
    if len(binding_elements) != 1:
        raise DescriptorError(
            f"exactly one binding required, found {len(binding_elements)}")
    if len(service_elements) != 1:
        raise DescriptorError(
            f"exactly one service required, found {len(service_elements)}")

    binding_el = binding_elements[0]
    implements = binding_el.get("type", "")
    try:
        implements_bdef = Pid.parse(implements)
    except ValueError:
        raise DescriptorError(
            f"binding type must be the implemented behavior definition PID, "
            f"got {implements!r}")

    ports = [p for p in service_elements[0] if _tag(p) == "port"]
    if len(ports) != 1:
        raise DescriptorError(
            f"exactly one port required, found {len(ports)}", "service")
    address = ports[0].get("address", "")
    if not address.startswith(("http://", "https://")):
        raise DescriptorError(
            f"port address must be an absolute http(s) URL, got {address!r}",
            "service/port")

    bindings: dict[str, Binding] = {}
    for operation in binding_el:
        if _tag(operation) != "operation":
            raise DescriptorError(
                f"unsupported construct {_tag(operation)!r}", "binding")
        name = operation.get("name", "")
        method = method_map.methods.get(name)
        if method is None:
            raise DescriptorError(
                f"binding for undeclared method {name!r}", "binding")
        if name in bindings:
            raise DescriptorError(f"duplicate binding for {name!r}", "binding")
        verb = operation.get("verb", "")
        if verb not in HTTP_VERBS:
            raise DescriptorError(
                f"verb must be GET or POST, got {verb!r}",
                f"binding/operation {name}")
        location = operation.get("location", "")
        if location.startswith(("http://", "https://")):
            template = location
        elif location.startswith("/"):
            template = address.rstrip("/") + location
        else:
            raise DescriptorError(
                f"location must be absolute or start with '/', "
                f"got {location!r}", f"binding/operation {name}")

        placeholders = set(PLACEHOLDER_RE.findall(template))
        declared = set(method.binding_keys) | {p.name for p in method.user_params}
        if placeholders != declared:
            missing = sorted(declared - placeholders)
            extra = sorted(placeholders - declared)
            detail = []
            if extra:
                detail.append(f"undeclared placeholders {extra}")
            if missing:
                detail.append(f"unused declared inputs {missing}")
            raise DescriptorError("; ".join(detail),
                                  f"binding/operation {name}")
        bindings[name] = Binding(
            method=name,
            verb=verb,
            url_template=template,
            expected_mime=operation.get("expects", "*/*"),
            binding_keys=method.binding_keys,
            param_names=tuple(p.name for p in method.user_params),
        )

    for name in method_map.methods:
        if name not in bindings:
            raise DescriptorError(f"no binding for method {name!r}", "binding")
    return ServiceBindings(implements_bdef=implements_bdef, bindings=bindings)


def instantiate_binding(binding: Binding, key_values: dict[str, str],
                        user_args: dict[str, str]) -> ConcreteRequest:
    """Fill every placeholder in the template and return a dispatchable request.

    ``key_values`` must cover all binding keys (values substituted verbatim,
    they are URLs by construction); ``user_args`` must cover all declared
    parameters (values percent-encoded). Defaults for optional parameters
    are the caller's concern.
    """
    def substitute(match: re.Match) -> str:
        name = match.group(1)
        if name in binding.binding_keys:
            if name not in key_values:
                raise MissingBindingKey(name)
            return key_values[name]
        if name in binding.param_names:
            if name not in user_args:
                raise MissingRequiredParam(name)
            return urllib.parse.quote(user_args[name], safe="")
        raise MissingBindingKey(name)

    url = PLACEHOLDER_RE.sub(substitute, binding.url_template)
    return ConcreteRequest(verb=binding.verb, url=url,
                           expected_mime=binding.expected_mime)


def _emit_abstract(out: Emitter, method_map: MethodMap):
    for name in sorted(method_map.methods):
        method = method_map.methods[name]
        out.open(1, "message", {"name": f"{name}Request"})
        for key in method.binding_keys:
            out.element(2, "part", {"kind": "datastream", "name": key})
        for param in method.user_params:
            out.element(2, "part", {
                "default": param.default,
                "kind": "parameter",
                "name": param.name,
                "required": "true" if param.required else "false",
            })
        out.close(1, "message")
    out.open(1, "portType", {"name": "Methods"})
    for name in sorted(method_map.methods):
        out.element(2, "operation",
                    {"message": f"{name}Request", "name": name})
    out.close(1, "portType")


def render_method_map(method_map: MethodMap, name: str = "methods") -> bytes:
    """Canonical METHODMAP descriptor bytes for a behavior definition."""
    out = Emitter()
    out.open(0, "definitions", {"name": name, "xmlns": DESCRIPTOR_NS})
    _emit_abstract(out, method_map)
    out.close(0, "definitions")
    return out.tobytes()


def render_bindings(method_map: MethodMap, implements_bdef: Pid, address: str,
                    operations: dict[str, tuple[str, str, str]],
                    name: str = "mechanism") -> bytes:
    """Canonical SERVICEBINDINGS descriptor bytes for a behavior mechanism.

    ``operations`` maps each method name to (verb, location, expected mime);
    locations are absolute URLs or paths relative to ``address``.
    """
    out = Emitter()
    out.open(0, "definitions", {"name": name, "xmlns": DESCRIPTOR_NS})
    _emit_abstract(out, method_map)
    out.open(1, "binding", {"name": "http", "type": implements_bdef.render()})
    for method in sorted(operations):
        verb, location, expects = operations[method]
        out.element(2, "operation", {
            "expects": expects,
            "location": location,
            "name": method,
            "verb": verb,
        })
    out.close(1, "binding")
    out.open(1, "service", {"name": name})
    out.element(2, "port", {"address": address, "binding": "http"})
    out.close(1, "service")
    out.close(0, "definitions")
    return out.tobytes()
