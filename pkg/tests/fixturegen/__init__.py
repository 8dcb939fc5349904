"""Test-side generators that turn text fixtures into binary APK fixtures."""
