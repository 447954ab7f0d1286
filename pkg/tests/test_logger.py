import logging

from canaryaudit.logger import get_logger, setup_logger


def test_setup_logger_sets_level_and_format():
    logger = setup_logger("canaryaudit.test_level", level="DEBUG")
    assert logger.level == logging.DEBUG
    assert any(isinstance(h, logging.StreamHandler) for h in logger.handlers)
    assert logger.propagate is False


def test_setup_logger_reads_log_level(temp_env):
    temp_env["LOG_LEVEL"] = "warning"
    logger = setup_logger("canaryaudit.test_env")
    assert logger.level == logging.WARNING


def test_repeated_setup_updates_level_without_new_handlers():
    logger = setup_logger("canaryaudit.test_repeat", level="INFO")
    setup_logger("canaryaudit.test_repeat", level="ERROR")
    assert len(logger.handlers) == 1
    assert logger.level == logging.ERROR
    assert logger.handlers[0].level == logging.ERROR


def test_unknown_level_falls_back_to_info():
    logger = setup_logger("canaryaudit.test_unknown", level="CHATTY")
    assert logger.level == logging.INFO


def test_get_logger_returns_same_instance():
    l1 = setup_logger("canaryaudit.test_same", level="INFO")
    l2 = get_logger("canaryaudit.test_same")
    assert l1 is l2


def test_level_is_case_insensitive():
    logger = setup_logger("canaryaudit.test_lower", level="warning")
    assert logger.level == logging.WARNING
