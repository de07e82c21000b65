import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Optional

from ruamel.yaml import YAML


def calculate_md5_string(content: Any) -> str:
    """
    Calculate the MD5 checksum of a string. Mappings are hashed via their key-sorted JSON form.

    :param content: The input string or mapping.
    :return: MD5 checksum as a hexadecimal string.
    """
    if isinstance(content, dict):
        content = json.dumps(to_plain(content), sort_keys=True)
    if not isinstance(content, str):
        content = str(content)
    return hashlib.md5(content.encode('utf-8')).hexdigest()


def to_plain(data: Any) -> Any:
    """
    Converts a parsed YAML structure (ruamel round-trip types) into plain dicts, lists and scalars.
    """
    if isinstance(data, dict):
        return {str(key): to_plain(value) for key, value in data.items()}
    if isinstance(data, (list, tuple)):
        return [to_plain(item) for item in data]
    if isinstance(data, bool) or data is None:
        return data
    if isinstance(data, int):
        return int(data)
    if isinstance(data, float):
        return float(data)
    if isinstance(data, str):
        return str(data)
    return data


def load_yaml_file(file_path: Path) -> Optional[Dict]:
    """
    Load a YAML file and return its content as a dictionary.

    :param file_path: Path to the YAML file.
    :return: Content of the YAML file as plain data.
    """
    with Path(file_path).open('r', encoding='utf-8') as f:
        yaml = YAML(typ='rt', pure=True)
        return to_plain(yaml.load(f))


def write_file_atomic(target_file: Path, content: str):
    """
    Writes the given text to a temporary sibling file and moves it over the target.

    :param target_file: the file to (over)write
    :param content: the text to write
    """
    target_file = Path(target_file)
    target_file.parent.mkdir(parents=True, exist_ok=True)
    tmp_file = target_file.with_name(target_file.name + '.tmp')
    try:
        with tmp_file.open('w', encoding='utf-8', newline='\n') as f:
            f.write(content)
        tmp_file.replace(target_file)
    except OSError as ex:
        raise OSError(f"Failed to write '{target_file}': {ex}") from ex
    finally:
        if tmp_file.exists():
            try:
                tmp_file.unlink()
            except Exception:
                pass
