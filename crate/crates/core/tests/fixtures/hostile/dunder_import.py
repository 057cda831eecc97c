__import__('os').system('touch /tmp/com_pwned')
