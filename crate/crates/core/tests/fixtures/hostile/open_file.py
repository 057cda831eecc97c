open('/tmp/com_pwned', 'w')
